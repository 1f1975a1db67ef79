#include "llmie/prompt_editor.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "llmie/unicode.hpp"

#ifndef LLMIE_ASSETS_DIR
#define LLMIE_ASSETS_DIR "assets"
#endif

namespace llmie {

const std::vector<std::string>& extractor_kinds() {
  static const std::vector<std::string> kinds = {"basic", "review", "sentence", "binary_relation",
                                                 "multiclass_relation"};
  return kinds;
}

GuidelineStore::GuidelineStore(std::map<std::string, std::string> entries) : entries_(std::move(entries)) {
  for (const auto& kind : extractor_kinds()) {
    if (!entries_.contains(kind)) throw EditorError("no prompt guideline for extractor kind " + kind);
  }
}

GuidelineStore GuidelineStore::load(const std::filesystem::path& dir) {
  std::map<std::string, std::string> entries;
  for (const auto& kind : extractor_kinds()) {
    const auto path = dir / (kind + ".md");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw EditorError("cannot read guideline " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    entries.emplace(kind, buf.str());
  }
  return GuidelineStore(std::move(entries));
}

std::filesystem::path GuidelineStore::default_directory() {
  return std::filesystem::path(LLMIE_ASSETS_DIR) / "guidelines";
}

const std::string& GuidelineStore::guideline(const std::string& kind) const {
  auto it = entries_.find(kind);
  if (it == entries_.end()) throw EditorError("unknown extractor kind: " + kind);
  return it->second;
}

ChatSession::ChatSession(std::string extractor_kind, std::string guideline, std::shared_ptr<InferenceEngine> engine)
    : kind_(std::move(extractor_kind)), guideline_(std::move(guideline)), engine_(std::move(engine)) {
  if (!engine_) throw EditorError("prompt editor needs an inference engine");
  history_.push_back({Role::system, std::string(kEditorSystemPrompt)});
}

std::string ChatSession::chat_turn(const std::string& user_text) {
  if (user_text.empty()) throw EditorError("chat turn must not be empty");
  auto messages = history_;
  if (messages.size() == 1) {
    const PromptTemplate wrapper{std::string(kEditorChatTemplate)};
    auto content = wrapper.render(std::map<std::string, std::string>{{"prompt_guideline", guideline_}});
    content += "\n\n# User request\n\n" + user_text;
    messages.push_back({Role::user, std::move(content)});
  } else {
    messages.push_back({Role::user, user_text});
  }
  auto reply = engine_->chat(messages);
  messages.push_back({Role::assistant, reply});
  history_ = std::move(messages);
  return reply;
}

std::string ChatSession::last_reply() const {
  for (auto it = history_.rbegin(); it != history_.rend(); ++it)
    if (it->role == Role::assistant) return it->content;
  return {};
}

ChatSession new_session(const GuidelineStore& store, const std::string& extractor_kind,
                        std::shared_ptr<InferenceEngine> engine) {
  if (!store.contains(extractor_kind)) throw EditorError("unknown extractor kind: " + extractor_kind);
  return ChatSession(extractor_kind, store.guideline(extractor_kind), std::move(engine));
}

namespace {

std::string_view first_code_block(std::string_view text) {
  const auto open = text.find("```");
  if (open == std::string_view::npos) return text;
  auto body = text.find('\n', open);
  if (body == std::string_view::npos) return text;
  ++body;
  const auto close = text.find("```", body);
  return text.substr(body, close == std::string_view::npos ? std::string_view::npos : close - body);
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::vector<std::string> headings(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream lines{std::string(text)};
  std::string line;
  while (std::getline(lines, line)) {
    auto pos = line.find_first_not_of(" \t");
    if (pos == std::string::npos || line[pos] != '#') continue;
    pos = line.find_first_not_of('#', pos);
    if (pos == std::string::npos) continue;
    pos = line.find_first_not_of(" \t", pos);
    if (pos == std::string::npos) continue;
    out.push_back(lower_ascii(line.substr(pos)));
  }
  return out;
}

}  // namespace

PromptTemplate extract_template(std::string_view assistant_text) {
  static const std::vector<std::string> required = {"Task description", "Schema definition", "Output format",
                                                    "Input"};
  const auto body = first_code_block(assistant_text);
  const auto found = headings(body);
  std::vector<std::string> missing;
  for (const auto& section : required) {
    const auto key = lower_ascii(section);
    const bool present =
        std::any_of(found.begin(), found.end(), [&](const std::string& h) { return h.rfind(key, 0) == 0; });
    if (!present) missing.push_back(section);
  }
  PromptTemplate tmpl{std::string(body)};
  if (tmpl.placeholders().empty()) missing.push_back("placeholder");
  if (!missing.empty()) {
    std::string joined;
    for (const auto& m : missing) joined += (joined.empty() ? "" : ", ") + m;
    throw TemplateError(TemplateError::Kind::incomplete, "template is incomplete, missing: " + joined, joined);
  }
  return tmpl;
}

}  // namespace llmie
