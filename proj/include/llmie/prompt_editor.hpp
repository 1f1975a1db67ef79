#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "llmie/engine.hpp"
#include "llmie/prompting.hpp"

namespace llmie {

class EditorError : public Error {
 public:
  using Error::Error;
};

// Extractor kinds that ship with a prompt-writing guideline.
const std::vector<std::string>& extractor_kinds();

// Per-extractor guideline documents, immutable once loaded.
class GuidelineStore {
 public:
  explicit GuidelineStore(std::map<std::string, std::string> entries);

  // Reads <dir>/<kind>.md for every shipped kind.
  static GuidelineStore load(const std::filesystem::path& dir);
  // Directory compiled in as the default assets location.
  static std::filesystem::path default_directory();

  bool contains(const std::string& kind) const { return entries_.contains(kind); }
  const std::string& guideline(const std::string& kind) const;

 private:
  std::map<std::string, std::string> entries_;
};

inline constexpr std::string_view kEditorSystemPrompt =
    "You are an AI assistant specializing in prompt writing and improvement. Your role is to help users refine, "
    "rewrite, and generate effective prompts based on guidelines provided. When you write a prompt template, put "
    "the complete template in a single fenced code block. The template must contain the sections \"# Task "
    "description\", \"# Schema definition\", \"# Output format definition\" and \"# Input\", and mark inputs with "
    "double-brace placeholders such as {{input}}. Entity outputs are a JSON list of objects with the keys "
    "\"entity_text\" and \"attr\".";

inline constexpr std::string_view kEditorChatTemplate =
    "# Task description\n\nChat with the user following the prompt guideline below.\n\n# Prompt guideline\n\n"
    "{{prompt_guideline}}";

// One prompt-development conversation. The first user turn is wrapped in the
// guideline chat template; later turns are sent verbatim.
class ChatSession {
 public:
  ChatSession(std::string extractor_kind, std::string guideline, std::shared_ptr<InferenceEngine> engine);

  // On engine failure the history is left unchanged and the error propagates.
  std::string chat_turn(const std::string& user_text);

  const std::string& extractor_kind() const { return kind_; }
  const std::vector<ChatMessage>& history() const { return history_; }
  // Most recent assistant reply, empty before the first.
  std::string last_reply() const;

 private:
  std::string kind_;
  std::string guideline_;
  std::shared_ptr<InferenceEngine> engine_;
  std::vector<ChatMessage> history_;
};

ChatSession new_session(const GuidelineStore& store, const std::string& extractor_kind,
                        std::shared_ptr<InferenceEngine> engine);

// Pulls a template out of an assistant reply and checks the four required
// sections and at least one placeholder; throws TemplateError (incomplete).
PromptTemplate extract_template(std::string_view assistant_text);

}  // namespace llmie
