#include "llmie/prompting.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "llmie/unicode.hpp"

namespace llmie {

namespace {

bool is_name_char(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

struct Token {
  std::size_t begin;  // byte offset of "{{"
  std::size_t end;    // byte offset after "}}"
  std::string name;
};

std::vector<Token> scan(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t pos = 0;
  while ((pos = text.find("{{", pos)) != std::string_view::npos) {
    std::size_t p = pos + 2;
    while (p < text.size() && is_name_char(text[p])) ++p;
    if (p == pos + 2 || text.substr(p, 2) != "}}") {
      const auto offset = unicode::length(text.substr(0, pos));
      throw TemplateError(TemplateError::Kind::malformed_placeholder,
                          "malformed placeholder at offset " + std::to_string(offset), {}, offset);
    }
    tokens.push_back({pos, p + 2, std::string(text.substr(pos + 2, p - pos - 2))});
    pos = p + 2;
  }
  return tokens;
}

}  // namespace

TemplateError::TemplateError(Kind kind, std::string message, std::string subject, std::size_t position)
    : Error(std::move(message)), kind_(kind), subject_(std::move(subject)), position_(position) {}

std::vector<std::string> find_placeholders(std::string_view template_text) {
  std::vector<std::string> names;
  for (auto& token : scan(template_text)) {
    if (std::find(names.begin(), names.end(), token.name) == names.end()) names.push_back(std::move(token.name));
  }
  return names;
}

PromptTemplate::PromptTemplate(std::string text) : text_(std::move(text)), placeholders_(find_placeholders(text_)) {}

bool PromptTemplate::has_placeholder(std::string_view name) const {
  return std::find(placeholders_.begin(), placeholders_.end(), name) != placeholders_.end();
}

std::string PromptTemplate::render(std::string_view input) const {
  if (placeholders_.size() != 1) {
    throw TemplateError(TemplateError::Kind::ambiguous_string_input,
                        "string input needs exactly one placeholder, template has " +
                            std::to_string(placeholders_.size()));
  }
  return render(std::map<std::string, std::string>{{placeholders_.front(), std::string(input)}});
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
  for (const auto& name : placeholders_) {
    if (!values.contains(name))
      throw TemplateError(TemplateError::Kind::missing_key, "no value for placeholder \"" + name + "\"", name);
  }
  std::string out;
  out.reserve(text_.size());
  std::size_t last = 0;
  for (const auto& token : scan(text_)) {
    out.append(text_, last, token.begin - last);
    out += values.at(token.name);
    last = token.end;
  }
  out.append(text_, last);
  return out;
}

PromptTemplate load_template(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TemplateError(TemplateError::Kind::io, "cannot read template file " + path, path);
  std::stringstream buf;
  buf << in.rdbuf();
  return PromptTemplate(buf.str());
}

}  // namespace llmie
