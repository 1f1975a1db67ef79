#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "llmie/datamodel.hpp"

namespace llmie {

// One entity as the model reported it, before span grounding.
struct RawEntityRecord {
  std::string entity_text;
  Attributes attributes;

  bool operator==(const RawEntityRecord&) const = default;
};

struct EntityParse {
  std::vector<RawEntityRecord> records;
  std::size_t discarded = 0;
  std::vector<std::string> notes;
};

// Tolerant recovery of `[{"entity_text": ..., "attr": {...}}, ...]` from raw
// model output. Never throws; problems are reported through notes.
EntityParse extract_json_entities(std::string_view llm_output);

struct GroundedSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t next_cursor = 0;

  bool operator==(const GroundedSpan&) const = default;
};

// Earliest occurrence of entity_text at or after cursor, trying an exact
// match, then a case-folded match, then a whitespace-normalized (and
// case-folded) match. nullopt when none applies.
std::optional<GroundedSpan> ground_entity(std::u32string_view doc_text, std::string_view entity_text,
                                          std::size_t cursor);
std::optional<GroundedSpan> ground_entity(std::string_view doc_text, std::string_view entity_text,
                                          std::size_t cursor);

struct SentenceSpan {
  std::string text;
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const SentenceSpan&) const = default;
};

// Rule-based, offset-preserving sentence segmentation.
std::vector<SentenceSpan> split_sentences(std::u32string_view doc_text);
std::vector<SentenceSpan> split_sentences(std::string_view doc_text);

// Abbreviations that never end a sentence (lower case, with their periods).
const std::vector<std::u32string>& sentence_abbreviations();

}  // namespace llmie
