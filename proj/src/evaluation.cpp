#include "llmie/evaluation.hpp"

#include <algorithm>
#include <iomanip>
#include <optional>
#include <sstream>

#include "llmie/unicode.hpp"

namespace llmie {

MatchMode match_mode_from_string(const std::string& name) {
  if (name == "strict") return MatchMode::strict;
  if (name == "relaxed" || name == "lenient") return MatchMode::relaxed;
  throw Error("unknown match mode: " + name);
}

namespace {

double ratio(std::size_t num, std::size_t den) { return den == 0 ? 0.0 : static_cast<double>(num) / den; }

std::string normalize_value(const std::string& value) {
  auto chars = unicode::decode(value);
  std::size_t b = 0;
  std::size_t e = chars.size();
  while (b < e && unicode::is_space(chars[b])) ++b;
  while (e > b && unicode::is_space(chars[e - 1])) --e;
  return unicode::encode(unicode::fold(std::u32string_view(chars).substr(b, e - b)));
}

bool types_agree(const Frame& pred, const Frame& gold, const std::string& type_attribute) {
  if (type_attribute.empty()) return true;
  return pred.attribute(type_attribute) == gold.attribute(type_attribute);
}

}  // namespace

void MetricsReport::finalize() {
  precision = ratio(true_positives, true_positives + false_positives);
  recall = ratio(true_positives, true_positives + false_negatives);
  f1 = (precision + recall) == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

MetricsReport& MetricsReport::operator+=(const MetricsReport& other) {
  true_positives += other.true_positives;
  false_positives += other.false_positives;
  false_negatives += other.false_negatives;
  finalize();
  return *this;
}

bool spans_match(std::size_t pred_start, std::size_t pred_end, std::size_t gold_start, std::size_t gold_end,
                 MatchMode mode) {
  if (pred_start == gold_start && pred_end == gold_end) return true;
  return mode == MatchMode::relaxed && pred_start < gold_end && gold_start < pred_end;
}

std::vector<MatchedPair> match_frames(const std::vector<Frame>& pred, const std::vector<Frame>& gold,
                                      const MatchPolicy& policy) {
  std::vector<bool> used(pred.size(), false);
  std::vector<std::optional<std::size_t>> assignment(gold.size());

  auto pick = [&](const Frame& g, bool exact_only) -> std::optional<std::size_t> {
    std::optional<std::size_t> best;
    for (std::size_t p = 0; p < pred.size(); ++p) {
      if (used[p] || !types_agree(pred[p], g, policy.type_attribute)) continue;
      const bool exact = pred[p].start == g.start && pred[p].end == g.end;
      if (exact_only ? !exact : !spans_match(pred[p].start, pred[p].end, g.start, g.end, policy.mode)) continue;
      if (!best || std::tie(pred[p].start, pred[p].end) < std::tie(pred[*best].start, pred[*best].end)) best = p;
    }
    return best;
  };

  for (bool exact_only : {true, false}) {
    if (!exact_only && policy.mode == MatchMode::strict) break;
    for (std::size_t g = 0; g < gold.size(); ++g) {
      if (assignment[g]) continue;
      if (auto p = pick(gold[g], exact_only)) {
        used[*p] = true;
        assignment[g] = p;
      }
    }
  }

  std::vector<MatchedPair> pairs;
  for (std::size_t g = 0; g < gold.size(); ++g)
    if (assignment[g]) pairs.push_back({*assignment[g], g});
  return pairs;
}

MetricsReport ner_metrics(const std::vector<Frame>& pred, const std::vector<Frame>& gold, const MatchPolicy& policy) {
  const auto pairs = match_frames(pred, gold, policy);
  MetricsReport report;
  report.true_positives = pairs.size();
  report.false_positives = pred.size() - pairs.size();
  report.false_negatives = gold.size() - pairs.size();
  report.finalize();
  return report;
}

std::map<std::string, double> attribute_accuracy(const std::vector<Frame>& pred, const std::vector<Frame>& gold,
                                                 const std::vector<MatchedPair>& pairs,
                                                 const std::vector<std::string>& attribute_keys) {
  std::map<std::string, double> out;
  for (const auto& key : attribute_keys) {
    std::size_t defined = 0;
    std::size_t agree = 0;
    for (const auto& pair : pairs) {
      const auto& g = gold[pair.gold];
      const auto& p = pred[pair.pred];
      auto git = g.attributes.find(key);
      if (git == g.attributes.end()) continue;
      ++defined;
      auto pit = p.attributes.find(key);
      if (pit != p.attributes.end() && normalize_value(pit->second) == normalize_value(git->second)) ++agree;
    }
    if (defined > 0) out[key] = ratio(agree, defined);
  }
  return out;
}

std::vector<SpanPair> relation_triples(const IEDocument& doc) {
  std::vector<SpanPair> out;
  for (const auto& r : doc.relations()) {
    const auto* a = doc.find_frame(r.frame_1_id);
    const auto* b = doc.find_frame(r.frame_2_id);
    if (!a || !b) continue;
    if (std::tie(b->start, b->end) < std::tie(a->start, a->end)) std::swap(a, b);
    out.push_back({a->start, a->end, b->start, b->end, r.relation_type});
  }
  return out;
}

namespace {

bool endpoints_match(const SpanPair& p, const SpanPair& g, MatchMode mode, bool exact_only) {
  if (p.type != g.type) return false;
  const auto m = exact_only ? MatchMode::strict : mode;
  const bool straight = spans_match(p.start_1, p.end_1, g.start_1, g.end_1, m) &&
                        spans_match(p.start_2, p.end_2, g.start_2, g.end_2, m);
  const bool crossed = spans_match(p.start_1, p.end_1, g.start_2, g.end_2, m) &&
                       spans_match(p.start_2, p.end_2, g.start_1, g.end_1, m);
  return straight || crossed;
}

}  // namespace

MetricsReport relation_metrics(const IEDocument& pred, const IEDocument& gold, MatchMode mode) {
  const auto p = relation_triples(pred);
  const auto g = relation_triples(gold);
  std::vector<bool> used(p.size(), false);
  std::vector<bool> matched(g.size(), false);
  for (bool exact_only : {true, false}) {
    if (!exact_only && mode == MatchMode::strict) break;
    for (std::size_t gi = 0; gi < g.size(); ++gi) {
      if (matched[gi]) continue;
      for (std::size_t pi = 0; pi < p.size(); ++pi) {
        if (used[pi] || !endpoints_match(p[pi], g[gi], mode, exact_only)) continue;
        used[pi] = true;
        matched[gi] = true;
        break;
      }
    }
  }
  MetricsReport report;
  report.true_positives = static_cast<std::size_t>(std::count(matched.begin(), matched.end(), true));
  report.false_positives = p.size() - report.true_positives;
  report.false_negatives = g.size() - report.true_positives;
  report.finalize();
  return report;
}

nlohmann::ordered_json to_json(const MetricsReport& report) {
  nlohmann::ordered_json j{{"true_positives", report.true_positives},
                           {"false_positives", report.false_positives},
                           {"false_negatives", report.false_negatives},
                           {"precision", report.precision},
                           {"recall", report.recall},
                           {"f1", report.f1}};
  nlohmann::ordered_json attrs = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.per_attribute_accuracy) attrs[k] = v;
  j["per_attribute_accuracy"] = std::move(attrs);
  return j;
}

std::string format_table(const std::string& title, const MetricsReport& report) {
  std::ostringstream os;
  os << title << "\n";
  os << std::left << std::setw(12) << "TP" << std::setw(12) << "FP" << std::setw(12) << "FN" << std::setw(12)
     << "Precision" << std::setw(12) << "Recall" << "F1\n";
  os << std::setw(12) << report.true_positives << std::setw(12) << report.false_positives << std::setw(12)
     << report.false_negatives << std::fixed << std::setprecision(4) << std::setw(12) << report.precision
     << std::setw(12) << report.recall << report.f1 << "\n";
  if (!report.per_attribute_accuracy.empty()) {
    os << std::setw(24) << "Attribute" << "Accuracy\n";
    for (const auto& [k, v] : report.per_attribute_accuracy) os << std::setw(24) << k << v << "\n";
  }
  return os.str();
}

}  // namespace llmie
