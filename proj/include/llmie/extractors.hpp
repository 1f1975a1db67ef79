#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "llmie/datamodel.hpp"
#include "llmie/engine.hpp"
#include "llmie/prompting.hpp"

namespace llmie {

enum class ReviewMode { addition, revision };

inline constexpr std::string_view kDefaultReviewInstruction =
    "Review the text and your extraction above. Add any missed entities and correct mistakes. "
    "Output the complete JSON list again.";

// Null label for multi-class relation extraction.
inline constexpr std::string_view kNoRelation = "No-relation";

class ExtractionError : public Error {
 public:
  using Error::Error;
};

struct ExtractorConfig {
  std::shared_ptr<InferenceEngine> engine;
  PromptTemplate prompt;
  GenerationConfig generation;
  std::size_t max_concurrency = 1;
  ReviewMode review_mode = ReviewMode::addition;
  std::string review_instruction{kDefaultReviewInstruction};
  std::size_t context_padding = 200;
  // Sentence extractor only: also fill a {{context}} placeholder with the
  // whole document. Off by default so each prompt carries just its sentence.
  bool sentence_document_context = false;
};

// Frames plus what happened on the way: parse and grounding notes, the
// number of discarded JSON elements, and LLM calls made.
struct FrameExtraction {
  std::vector<Frame> frames;
  std::vector<std::string> notes;
  std::size_t discarded = 0;
  std::size_t llm_calls = 0;
};

struct RelationExtraction {
  std::vector<Relation> relations;
  std::vector<std::string> notes;
  std::size_t llm_calls = 0;
};

// One LLM call over the whole document.
FrameExtraction basic_extract(const ExtractorConfig& config, std::string_view doc_text);
// Initial extraction followed by a review turn (addition or revision).
FrameExtraction review_extract(const ExtractorConfig& config, std::string_view doc_text);
// One LLM call per sentence, up to max_concurrency in flight.
FrameExtraction sentence_extract(const ExtractorConfig& config, std::string_view doc_text);

struct FramePairTask {
  Frame frame_1;  // earlier span
  Frame frame_2;
  std::vector<std::string> possible_types;
  std::string context;
};

// Admissible relation types for a pair; empty means the pair needs no LLM call.
using PossibleTypesFn = std::function<std::vector<std::string>(const Frame&, const Frame&)>;

// Rule-based pre-filter keyed on the unordered pair of type values, e.g.
// {Drug, Dosage} -> ["Dosage-Drug", "No-relation"]. Pairs without a rule get
// no types and are skipped.
struct TypePairRule {
  std::string type_1;
  std::string type_2;
  std::vector<std::string> relation_types;
};

class TypePairFilter {
 public:
  TypePairFilter(std::string type_attribute, std::vector<TypePairRule> rules);

  // {"type_attribute": "Type", "rules": [{"types": [a, b], "relation_types": [...]}]}
  static TypePairFilter load(const std::string& path);
  static TypePairFilter from_json_text(const std::string& text);

  std::vector<std::string> operator()(const Frame& a, const Frame& b) const;

 private:
  std::string type_attribute_;
  std::vector<TypePairRule> rules_;
};

// Slice around both mentions with `[E1]..[/E1]` and `[E2]..[/E2]` markers;
// E1 is the frame whose span comes first.
std::string build_pair_context(std::string_view doc_text, const Frame& frame_1, const Frame& frame_2,
                               std::size_t context_padding);

std::vector<FramePairTask> enumerate_pairs(std::string_view doc_text, const std::vector<Frame>& frames,
                                           const PossibleTypesFn& possible_types, std::size_t context_padding = 200);

// Relation templates may use {{context}}, {{frame_1}}, {{frame_2}} and
// {{relation_types}}.
RelationExtraction binary_relation_extract(const ExtractorConfig& config, const std::vector<FramePairTask>& tasks);
RelationExtraction multiclass_relation_extract(const ExtractorConfig& config,
                                               const std::vector<FramePairTask>& tasks);

// Answer parsers, exposed for testing. parse_binary_answer returns
// nullopt when neither a yes nor a no token is present.
std::optional<bool> parse_binary_answer(std::string_view answer);
// Longest case-insensitive match among the possible types, or nullopt.
std::optional<std::string> match_relation_type(std::string_view answer, const std::vector<std::string>& types);

// Runs task(i) for i in [0, count) with at most max_concurrency workers.
void run_bounded(std::size_t count, std::size_t max_concurrency, const std::function<void(std::size_t)>& task);

}  // namespace llmie
