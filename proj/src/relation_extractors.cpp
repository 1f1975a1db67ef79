#include <algorithm>
#include <fstream>
#include <sstream>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "llmie/extractors.hpp"
#include "llmie/unicode.hpp"

namespace llmie {

namespace {

// Span order used for E1/E2: earlier start first, the longer span first on a
// tie so nested mentions put the outer frame in E1.
bool span_before(const Frame& a, const Frame& b) {
  if (a.start != b.start) return a.start < b.start;
  return a.end > b.end;
}

std::string frame_json(const Frame& f) {
  nlohmann::ordered_json attrs = nlohmann::ordered_json::object();
  for (const auto& [k, v] : f.attributes) attrs[k] = v;
  nlohmann::ordered_json j{{"frame_id", f.frame_id},
                           {"entity_text", f.entity_text},
                           {"start", f.start},
                           {"end", f.end},
                           {"attr", std::move(attrs)}};
  return j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

std::string types_json(const std::vector<std::string>& types) {
  return nlohmann::json(types).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::vector<ChatMessage> pair_prompt(const ExtractorConfig& config, const FramePairTask& task) {
  const std::map<std::string, std::string> values{
      {"context", task.context},
      {"frame_1", frame_json(task.frame_1)},
      {"frame_2", frame_json(task.frame_2)},
      {"relation_types", types_json(task.possible_types)},
  };
  return {{Role::user, config.prompt.render(values)}};
}

void check_config(const ExtractorConfig& config) {
  if (!config.engine) throw ExtractionError("extractor has no inference engine");
  if (config.max_concurrency < 1) throw ExtractionError("max_concurrency must be at least 1");
}

bool is_word_char(char32_t c) { return unicode::is_alnum(c) || c == U'_'; }

// Position of the first whole-word occurrence of word in text, or npos.
std::size_t find_word(std::u32string_view text, std::u32string_view word) {
  std::size_t pos = 0;
  while ((pos = text.find(word, pos)) != std::u32string_view::npos) {
    const bool left = pos == 0 || !is_word_char(text[pos - 1]);
    const auto after = pos + word.size();
    const bool right = after >= text.size() || !is_word_char(text[after]);
    if (left && right) return pos;
    ++pos;
  }
  return std::u32string_view::npos;
}

struct PairOutcome {
  std::optional<Relation> relation;
  std::string note;
};

template <typename Decide>
RelationExtraction run_pairs(const ExtractorConfig& config, const std::vector<FramePairTask>& tasks, Decide decide) {
  std::vector<PairOutcome> outcomes(tasks.size());
  run_bounded(tasks.size(), config.max_concurrency, [&](std::size_t i) {
    const auto& task = tasks[i];
    const auto label = "pair (" + task.frame_1.frame_id + ", " + task.frame_2.frame_id + ")";
    try {
      const auto answer = config.engine->chat(pair_prompt(config, task), config.generation);
      outcomes[i] = decide(task, answer, label);
    } catch (const Error& e) {
      outcomes[i].note = label + ": " + e.what() + "; treated as no relation";
    }
  });
  RelationExtraction result;
  result.llm_calls = tasks.size();
  for (auto& o : outcomes) {
    if (o.relation) result.relations.push_back(std::move(*o.relation));
    if (!o.note.empty()) result.notes.push_back(std::move(o.note));
  }
  return result;
}

}  // namespace

std::string build_pair_context(std::string_view doc_text, const Frame& frame_1, const Frame& frame_2,
                               std::size_t context_padding) {
  const auto chars = unicode::decode(doc_text);
  const Frame* e1 = &frame_1;
  const Frame* e2 = &frame_2;
  if (span_before(*e2, *e1)) std::swap(e1, e2);

  const auto lo = std::min(e1->start, e2->start);
  const auto hi = std::max(e1->end, e2->end);
  const std::size_t begin = lo > context_padding ? lo - context_padding : 0;
  const std::size_t end = std::min(chars.size(), hi + std::min(context_padding, chars.size()));

  // Marker events: closes before opens at the same offset; the inner span
  // closes first and the outer span opens first, keeping markers nested.
  struct Event {
    std::size_t pos;
    int order;  // 0 close E2, 1 close E1, 2 open E1, 3 open E2
    const char32_t* tag;
  };
  std::vector<Event> events{
      {e1->start, 2, U"[E1]"},
      {e1->end, 1, U"[/E1]"},
      {e2->start, 3, U"[E2]"},
      {e2->end, 0, U"[/E2]"},
  };
  // E2 ends after E1 only on partial overlap or disjoint spans; then E1 closes first.
  if (e2->end > e1->end) {
    events[1].order = 0;
    events[3].order = 1;
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return std::tie(a.pos, a.order) < std::tie(b.pos, b.order); });

  std::u32string out;
  std::size_t cursor = begin;
  for (const auto& ev : events) {
    const auto pos = std::clamp(ev.pos, begin, end);
    out.append(chars, cursor, pos - cursor);
    out += ev.tag;
    cursor = pos;
  }
  out.append(chars, cursor, end - cursor);
  return unicode::encode(out);
}

std::vector<FramePairTask> enumerate_pairs(std::string_view doc_text, const std::vector<Frame>& frames,
                                           const PossibleTypesFn& possible_types, std::size_t context_padding) {
  std::vector<FramePairTask> tasks;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    for (std::size_t j = i + 1; j < frames.size(); ++j) {
      const Frame* a = &frames[i];
      const Frame* b = &frames[j];
      if (span_before(*b, *a)) std::swap(a, b);
      auto types = possible_types(*a, *b);
      if (types.empty()) continue;
      tasks.push_back({*a, *b, std::move(types), build_pair_context(doc_text, *a, *b, context_padding)});
    }
  }
  return tasks;
}

std::optional<bool> parse_binary_answer(std::string_view answer) {
  const auto text = unicode::fold(unicode::decode(answer));
  std::optional<bool> verdict;
  std::size_t best = std::u32string::npos;
  for (auto [word, value] : {std::pair{U"true", true}, {U"yes", true}, {U"false", false}, {U"no", false}}) {
    const auto pos = find_word(text, word);
    if (pos < best) {
      best = pos;
      verdict = value;
    }
  }
  return verdict;
}

std::optional<std::string> match_relation_type(std::string_view answer, const std::vector<std::string>& types) {
  const auto text = unicode::fold(unicode::decode(answer));
  std::optional<std::string> best;
  std::size_t best_len = 0;
  std::size_t best_pos = 0;
  for (const auto& type : types) {
    const auto needle = unicode::fold(unicode::decode(type));
    if (needle.empty()) continue;
    const auto pos = text.find(needle);
    if (pos == std::u32string::npos) continue;
    if (!best || needle.size() > best_len || (needle.size() == best_len && pos < best_pos)) {
      best = type;
      best_len = needle.size();
      best_pos = pos;
    }
  }
  return best;
}

RelationExtraction binary_relation_extract(const ExtractorConfig& config, const std::vector<FramePairTask>& tasks) {
  check_config(config);
  return run_pairs(config, tasks, [](const FramePairTask& task, const std::string& answer, const std::string& label) {
    PairOutcome out;
    const auto verdict = parse_binary_answer(answer);
    if (!verdict) out.note = label + ": unparseable answer; treated as no relation";
    else if (*verdict) out.relation = Relation{task.frame_1.frame_id, task.frame_2.frame_id, std::nullopt};
    return out;
  });
}

RelationExtraction multiclass_relation_extract(const ExtractorConfig& config,
                                               const std::vector<FramePairTask>& tasks) {
  check_config(config);
  for (const auto& task : tasks) {
    if (std::find(task.possible_types.begin(), task.possible_types.end(), kNoRelation) == task.possible_types.end()) {
      throw ExtractionError("pair (" + task.frame_1.frame_id + ", " + task.frame_2.frame_id +
                            ") lacks the \"No-relation\" label among its possible types");
    }
  }
  const auto null_label = unicode::fold(unicode::decode(kNoRelation));
  return run_pairs(config, tasks, [&](const FramePairTask& task, const std::string& answer, const std::string& label) {
    PairOutcome out;
    const auto type = match_relation_type(answer, task.possible_types);
    if (!type) out.note = label + ": answer matches no relation type; treated as no relation";
    else if (unicode::fold(unicode::decode(*type)) != null_label)
      out.relation = Relation{task.frame_1.frame_id, task.frame_2.frame_id, *type};
    return out;
  });
}

}  // namespace llmie

namespace llmie {

TypePairFilter::TypePairFilter(std::string type_attribute, std::vector<TypePairRule> rules)
    : type_attribute_(std::move(type_attribute)), rules_(std::move(rules)) {}

TypePairFilter TypePairFilter::from_json_text(const std::string& text) {
  const auto value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded() || !value.is_object()) throw ExtractionError("relation filter must be a JSON object");
  std::string type_attribute = "Type";
  if (value.contains("type_attribute")) {
    if (!value["type_attribute"].is_string()) throw ExtractionError("type_attribute must be a string");
    type_attribute = value["type_attribute"].get<std::string>();
  }
  if (!value.contains("rules") || !value["rules"].is_array()) throw ExtractionError("relation filter needs a rules list");
  std::vector<TypePairRule> rules;
  for (const auto& rule : value["rules"]) {
    if (!rule.is_object() || !rule.contains("types") || !rule["types"].is_array() || rule["types"].size() != 2 ||
        !rule["types"][0].is_string() || !rule["types"][1].is_string() || !rule.contains("relation_types") ||
        !rule["relation_types"].is_array())
      throw ExtractionError("each filter rule needs \"types\" (two strings) and \"relation_types\"");
    TypePairRule r{rule["types"][0].get<std::string>(), rule["types"][1].get<std::string>(), {}};
    for (const auto& t : rule["relation_types"]) {
      if (!t.is_string()) throw ExtractionError("relation_types must be strings");
      r.relation_types.push_back(t.get<std::string>());
    }
    rules.push_back(std::move(r));
  }
  return TypePairFilter(std::move(type_attribute), std::move(rules));
}

TypePairFilter TypePairFilter::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ExtractionError("cannot read relation filter " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

std::vector<std::string> TypePairFilter::operator()(const Frame& a, const Frame& b) const {
  const auto ta = a.attribute(type_attribute_);
  const auto tb = b.attribute(type_attribute_);
  for (const auto& rule : rules_) {
    if ((rule.type_1 == ta && rule.type_2 == tb) || (rule.type_1 == tb && rule.type_2 == ta))
      return rule.relation_types;
  }
  return {};
}

}  // namespace llmie
