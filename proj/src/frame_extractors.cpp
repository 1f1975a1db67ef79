#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "llmie/extractors.hpp"
#include "llmie/parsing.hpp"
#include "llmie/unicode.hpp"

namespace llmie {

namespace {

void check_config(const ExtractorConfig& config) {
  if (!config.engine) throw ExtractionError("extractor has no inference engine");
  if (!config.prompt.has_placeholder("input"))
    throw ExtractionError("frame extraction templates need an {{input}} placeholder");
  if (config.max_concurrency < 1) throw ExtractionError("max_concurrency must be at least 1");
}

std::vector<ChatMessage> user_turn(const ExtractorConfig& config, std::string_view text,
                                   std::optional<std::string_view> context = std::nullopt) {
  std::map<std::string, std::string> values{{"input", std::string(text)}};
  if (context) values.emplace("context", std::string(*context));
  return {{Role::user, config.prompt.render(values)}};
}

// Parses one model response and grounds its records inside `unit`, whose
// first character sits at document offset `base`. Frames come back without ids.
struct UnitResult {
  std::vector<Frame> frames;
  std::vector<std::string> notes;
  std::size_t discarded = 0;
};

UnitResult ground_response(const std::string& response, std::u32string_view unit, std::size_t base) {
  UnitResult out;
  auto parsed = extract_json_entities(response);
  out.discarded = parsed.discarded;
  out.notes = std::move(parsed.notes);
  std::size_t cursor = 0;
  for (auto& record : parsed.records) {
    const auto span = ground_entity(unit, record.entity_text, cursor);
    if (!span) {
      out.notes.push_back("could not ground \"" + record.entity_text + "\"; frame dropped");
      continue;
    }
    cursor = span->next_cursor;
    Frame f;
    f.entity_text = unicode::encode(unit.substr(span->start, span->end - span->start));
    f.start = base + span->start;
    f.end = base + span->end;
    f.attributes = std::move(record.attributes);
    out.frames.push_back(std::move(f));
  }
  return out;
}

void assign_ids(std::vector<Frame>& frames) {
  for (std::size_t i = 0; i < frames.size(); ++i) frames[i].frame_id = ordinal_id(i + 1);
}

void absorb(FrameExtraction& into, UnitResult&& unit) {
  into.discarded += unit.discarded;
  for (auto& n : unit.notes) into.notes.push_back(std::move(n));
  for (auto& f : unit.frames) into.frames.push_back(std::move(f));
}

bool same_frame(const Frame& a, const Frame& b) {
  return a.start == b.start && a.end == b.end && a.attributes == b.attributes;
}

}  // namespace

FrameExtraction basic_extract(const ExtractorConfig& config, std::string_view doc_text) {
  check_config(config);
  const auto chars = unicode::decode(doc_text);
  FrameExtraction result;
  const auto response = config.engine->chat(user_turn(config, doc_text), config.generation);
  result.llm_calls = 1;
  absorb(result, ground_response(response, chars, 0));
  assign_ids(result.frames);
  return result;
}

FrameExtraction review_extract(const ExtractorConfig& config, std::string_view doc_text) {
  check_config(config);
  const auto chars = unicode::decode(doc_text);
  FrameExtraction result;

  auto messages = user_turn(config, doc_text);
  const auto initial = config.engine->chat(messages, config.generation);
  result.llm_calls = 1;

  messages.push_back({Role::assistant, initial});
  messages.push_back({Role::user, config.review_instruction});
  const auto review = config.engine->chat(messages, config.generation);
  result.llm_calls = 2;

  auto first = ground_response(initial, chars, 0);
  auto second = ground_response(review, chars, 0);
  if (config.review_mode == ReviewMode::revision) {
    result.discarded = first.discarded;
    for (auto& n : first.notes) result.notes.push_back("initial: " + n);
    absorb(result, std::move(second));
  } else {
    absorb(result, std::move(first));
    result.discarded += second.discarded;
    for (auto& n : second.notes) result.notes.push_back("review: " + n);
    for (auto& f : second.frames) {
      const bool seen = std::any_of(result.frames.begin(), result.frames.end(),
                                    [&](const Frame& existing) { return same_frame(existing, f); });
      if (!seen) result.frames.push_back(std::move(f));
    }
  }
  assign_ids(result.frames);
  return result;
}

FrameExtraction sentence_extract(const ExtractorConfig& config, std::string_view doc_text) {
  check_config(config);
  if (config.sentence_document_context && !config.prompt.has_placeholder("context"))
    throw ExtractionError("sentence_document_context needs a {{context}} placeholder in the template");
  const std::optional<std::string_view> context =
      config.sentence_document_context ? std::optional(doc_text) : std::nullopt;
  const auto chars = unicode::decode(doc_text);
  const auto sentences = split_sentences(std::u32string_view(chars));

  std::vector<std::optional<UnitResult>> units(sentences.size());
  std::vector<std::string> failures(sentences.size());
  run_bounded(sentences.size(), config.max_concurrency, [&](std::size_t i) {
    const auto& s = sentences[i];
    try {
      const auto response = config.engine->chat(user_turn(config, s.text, context), config.generation);
      units[i] = ground_response(response, std::u32string_view(chars).substr(s.start, s.end - s.start), s.start);
    } catch (const Error& e) {
      failures[i] = "sentence " + std::to_string(i) + " skipped: " + e.what();
    }
  });

  FrameExtraction result;
  result.llm_calls = sentences.size();
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (units[i]) absorb(result, std::move(*units[i]));
    else result.notes.push_back(std::move(failures[i]));
  }
  assign_ids(result.frames);
  return result;
}

}  // namespace llmie
