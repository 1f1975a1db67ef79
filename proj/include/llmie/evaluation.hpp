#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "llmie/datamodel.hpp"

namespace llmie {

enum class MatchMode { strict, relaxed };

MatchMode match_mode_from_string(const std::string& name);

struct MatchPolicy {
  MatchMode mode = MatchMode::strict;
  // Attribute whose values must agree; empty ignores entity types.
  std::string type_attribute = "Type";
};

struct MetricsReport {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::map<std::string, double> per_attribute_accuracy;

  // Recomputes precision, recall and F1 from the counts (0/0 -> 0).
  void finalize();
  // Sums counts; ratios are recomputed.
  MetricsReport& operator+=(const MetricsReport& other);
};

struct MatchedPair {
  std::size_t pred;  // index into pred
  std::size_t gold;  // index into gold
};

// Greedy one-to-one matching in gold order. Exact-span pairs are taken first,
// so relaxed matching never finds fewer pairs than strict; remaining golds
// take the leftmost overlapping prediction.
std::vector<MatchedPair> match_frames(const std::vector<Frame>& pred, const std::vector<Frame>& gold,
                                      const MatchPolicy& policy);

MetricsReport ner_metrics(const std::vector<Frame>& pred, const std::vector<Frame>& gold, const MatchPolicy& policy);

// Accuracy per attribute over matched pairs; values compared after trimming
// and case folding. Keys no matched gold frame defines are omitted.
std::map<std::string, double> attribute_accuracy(const std::vector<Frame>& pred, const std::vector<Frame>& gold,
                                                 const std::vector<MatchedPair>& pairs,
                                                 const std::vector<std::string>& attribute_keys);

// Relations are compared as unordered endpoint pairs plus relation type;
// endpoints match under the span rule of `mode`.
MetricsReport relation_metrics(const IEDocument& pred, const IEDocument& gold, MatchMode mode);

struct SpanPair {
  std::size_t start_1, end_1, start_2, end_2;
  std::optional<std::string> type;
};

// Relation triples with endpoints resolved to spans; dangling relations are skipped.
std::vector<SpanPair> relation_triples(const IEDocument& doc);

// Shared predicate for span agreement.
bool spans_match(std::size_t pred_start, std::size_t pred_end, std::size_t gold_start, std::size_t gold_end,
                 MatchMode mode);

nlohmann::ordered_json to_json(const MetricsReport& report);
// Aligned plain-text rendering with a title row.
std::string format_table(const std::string& title, const MetricsReport& report);

}  // namespace llmie
