#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "llmie/errors.hpp"

namespace llmie {

class TemplateError : public Error {
 public:
  enum class Kind { malformed_placeholder, missing_key, ambiguous_string_input, incomplete, io };

  TemplateError(Kind kind, std::string message, std::string subject = {}, std::size_t position = 0);

  Kind kind() const { return kind_; }
  // Placeholder name, missing section, or file path, depending on kind.
  const std::string& subject() const { return subject_; }
  // Character offset of a malformed placeholder.
  std::size_t position() const { return position_; }

 private:
  Kind kind_;
  std::string subject_;
  std::size_t position_;
};

// Distinct `{{name}}` placeholders in first-occurrence order. Any `{{` that
// does not open a well-formed placeholder is an error.
std::vector<std::string> find_placeholders(std::string_view template_text);

class PromptTemplate {
 public:
  PromptTemplate() = default;
  explicit PromptTemplate(std::string text);

  const std::string& text() const { return text_; }
  const std::vector<std::string>& placeholders() const { return placeholders_; }
  bool has_placeholder(std::string_view name) const;

  // Single-placeholder templates only.
  std::string render(std::string_view input) const;
  // Values are substituted literally; extra keys are ignored.
  std::string render(const std::map<std::string, std::string>& values) const;

 private:
  std::string text_;
  std::vector<std::string> placeholders_;
};

// Reads a UTF-8 template file (conventionally *.pt.txt).
PromptTemplate load_template(const std::string& path);

}  // namespace llmie
