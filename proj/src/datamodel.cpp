#include "llmie/datamodel.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "llmie/unicode.hpp"

namespace llmie {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string Frame::attribute(const std::string& key) const {
  auto it = attributes.find(key);
  return it == attributes.end() ? std::string() : it->second;
}

DocumentError::DocumentError(Kind kind, std::string message) : Error(std::move(message)), kind_(kind) {}

std::size_t ValidationReport::error_count() const {
  return std::count_if(findings.begin(), findings.end(),
                       [](const Finding& f) { return f.severity == Finding::Severity::error; });
}

std::size_t ValidationReport::warning_count() const { return findings.size() - error_count(); }

IEDocument::IEDocument(std::string doc_id, std::string text)
    : doc_id_(std::move(doc_id)), text_(std::move(text)), chars_(unicode::decode(text_)), length_(chars_.size()) {}

const Frame* IEDocument::find_frame(const std::string& frame_id) const {
  auto it = std::find_if(frames_.begin(), frames_.end(), [&](const Frame& f) { return f.frame_id == frame_id; });
  return it == frames_.end() ? nullptr : &*it;
}

bool IEDocument::remove_frame(const std::string& frame_id) {
  auto it = std::find_if(frames_.begin(), frames_.end(), [&](const Frame& f) { return f.frame_id == frame_id; });
  if (it == frames_.end()) return false;
  frames_.erase(it);
  return true;
}

namespace {

bool span_in_range(const Frame& f, std::size_t length) { return f.start < f.end && f.end <= length; }

bool span_matches(const Frame& f, const std::u32string& chars) {
  return span_in_range(f, chars.size()) &&
         unicode::encode(std::u32string_view(chars).substr(f.start, f.end - f.start)) == f.entity_text;
}

bool redundant(const Frame& a, const Frame& b) {
  return a.start == b.start && a.end == b.end && a.attributes == b.attributes;
}

std::string span_text(const Frame& f) {
  return "[" + std::to_string(f.start) + "," + std::to_string(f.end) + ")";
}

}  // namespace

void IEDocument::add_frame(Frame frame, DuplicatePolicy policy) {
  if (frame.frame_id.empty()) throw DocumentError(DocumentError::Kind::invalid_document, "frame id must be non-empty");
  if (!span_matches(frame, chars_)) {
    throw DocumentError(DocumentError::Kind::span_mismatch,
                        "frame " + frame.frame_id + " span " + span_text(frame) + " does not slice to \"" +
                            frame.entity_text + "\"");
  }
  if (find_frame(frame.frame_id))
    throw DocumentError(DocumentError::Kind::duplicate_id, "duplicate frame id " + frame.frame_id);
  if (policy == DuplicatePolicy::reject_duplicates) {
    for (const auto& existing : frames_) {
      if (redundant(existing, frame)) {
        throw DocumentError(DocumentError::Kind::duplicate_frame,
                            "frame " + frame.frame_id + " duplicates frame " + existing.frame_id);
      }
    }
  }
  frames_.push_back(std::move(frame));
}

void IEDocument::add_relation(Relation relation) {
  if (relation.frame_1_id == relation.frame_2_id)
    throw DocumentError(DocumentError::Kind::self_relation, "relation links frame " + relation.frame_1_id + " to itself");
  for (const auto* id : {&relation.frame_1_id, &relation.frame_2_id}) {
    if (!find_frame(*id)) throw DocumentError(DocumentError::Kind::unknown_frame_id, "unknown frame id " + *id);
  }
  relations_.push_back(std::move(relation));
}

ValidationReport validate_document(const IEDocument& doc) {
  using Severity = Finding::Severity;
  ValidationReport report;
  auto add = [&](Severity severity, std::string code, std::string message, std::vector<std::string> subjects) {
    report.findings.push_back({severity, std::move(code), std::move(message), std::move(subjects)});
  };

  const auto& frames = doc.frames();
  std::set<std::string> ids;
  std::vector<bool> usable(frames.size(), false);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    if (f.frame_id.empty()) add(Severity::error, "empty_frame_id", "frame #" + std::to_string(i) + " has no id", {});
    else if (!ids.insert(f.frame_id).second)
      add(Severity::error, "duplicate_frame_id", "frame id " + f.frame_id + " is used more than once", {f.frame_id});
    if (!span_in_range(f, doc.length())) {
      add(Severity::error, "span_out_of_range", "frame " + f.frame_id + " span " + span_text(f) + " is outside the text",
          {f.frame_id});
    } else if (!span_matches(f, doc.chars())) {
      add(Severity::error, "span_mismatch", "frame " + f.frame_id + " text does not match its span", {f.frame_id});
    } else {
      usable[i] = true;
    }
  }

  // Frames sorted by span for the overlap sweep; ties keep document order.
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < frames.size(); ++i)
    if (usable[i]) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(frames[a].start, frames[a].end) < std::tie(frames[b].start, frames[b].end);
  });
  std::vector<bool> is_duplicate(frames.size(), false);
  for (std::size_t x = 0; x < order.size(); ++x) {
    const auto& a = frames[order[x]];
    if (is_duplicate[order[x]]) continue;
    for (std::size_t y = x + 1; y < order.size() && frames[order[y]].start < a.end; ++y) {
      const auto& b = frames[order[y]];
      if (redundant(a, b)) {
        if (!is_duplicate[order[y]]) {
          is_duplicate[order[y]] = true;
          add(Severity::warning, "redundant_frame",
              "frame " + b.frame_id + " repeats the span and attributes of frame " + a.frame_id, {a.frame_id, b.frame_id});
        }
      } else if (!is_duplicate[order[y]]) {
        add(Severity::warning, "overlapping_frames",
            "frames " + a.frame_id + " and " + b.frame_id + " have overlapping spans", {a.frame_id, b.frame_id});
      }
    }
  }

  for (const auto& r : doc.relations()) {
    if (r.frame_1_id == r.frame_2_id) {
      add(Severity::error, "self_relation", "relation links frame " + r.frame_1_id + " to itself",
          {r.frame_1_id, r.frame_2_id});
    }
    for (const auto* id : {&r.frame_1_id, &r.frame_2_id}) {
      if (!ids.contains(*id)) {
        add(Severity::error, "dangling_relation", "relation refers to missing frame " + *id,
            {r.frame_1_id, r.frame_2_id});
      }
    }
  }
  return report;
}

ordered_json to_json(const IEDocument& doc) {
  ordered_json frames = ordered_json::array();
  for (const auto& f : doc.frames()) {
    ordered_json attrs = ordered_json::object();
    for (const auto& [k, v] : f.attributes) attrs[k] = v;
    frames.push_back(ordered_json{{"frame_id", f.frame_id},
                                  {"entity_text", f.entity_text},
                                  {"start", f.start},
                                  {"end", f.end},
                                  {"attributes", std::move(attrs)}});
  }
  ordered_json relations = ordered_json::array();
  for (const auto& r : doc.relations()) {
    relations.push_back(ordered_json{{"frame_1_id", r.frame_1_id},
                                     {"frame_2_id", r.frame_2_id},
                                     {"relation_type", r.relation_type ? ordered_json(*r.relation_type) : nullptr}});
  }
  return ordered_json{{"format_version", kFormatVersion},
                      {"doc_id", doc.doc_id()},
                      {"text", doc.text()},
                      {"frames", std::move(frames)},
                      {"relations", std::move(relations)}};
}

namespace {

[[noreturn]] void schema_error(const std::string& message) {
  throw DocumentError(DocumentError::Kind::schema, message);
}

void require_keys(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  if (!obj.is_object()) schema_error(where + " must be an object");
  for (const char* key : keys) {
    if (!obj.contains(key)) schema_error(where + " is missing key \"" + key + "\"");
  }
  for (const auto& [key, _] : obj.items()) {
    if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return key == k; }) == keys.end())
      schema_error(where + " has unexpected key \"" + key + "\"");
  }
}

std::string get_string(const json& obj, const char* key, const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_string()) schema_error(where + "." + key + " must be a string");
  return v.get<std::string>();
}

std::size_t get_offset(const json& obj, const char* key, const std::string& where) {
  const auto& v = obj.at(key);
  if (v.is_number_unsigned()) return v.get<std::size_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::size_t>(v.get<std::int64_t>());
  schema_error(where + "." + key + " must be a non-negative integer");
}

}  // namespace

IEDocument from_json(const json& value) {
  if (!value.is_object()) schema_error("document must be a JSON object");
  if (value.contains("format_version")) {
    const auto& version = value["format_version"];
    if (!version.is_number_integer()) schema_error("format_version must be an integer");
    if (version.get<std::int64_t>() != kFormatVersion)
      schema_error("unsupported format_version " + std::to_string(version.get<std::int64_t>()));
  }
  require_keys(value, {"format_version", "doc_id", "text", "frames", "relations"}, "document");

  IEDocument doc(get_string(value, "doc_id", "document"), get_string(value, "text", "document"));
  if (!value["frames"].is_array()) schema_error("document.frames must be an array");
  if (!value["relations"].is_array()) schema_error("document.relations must be an array");

  std::size_t i = 0;
  for (const auto& item : value["frames"]) {
    const auto where = "frames[" + std::to_string(i++) + "]";
    require_keys(item, {"frame_id", "entity_text", "start", "end", "attributes"}, where);
    Frame f;
    f.frame_id = get_string(item, "frame_id", where);
    f.entity_text = get_string(item, "entity_text", where);
    f.start = get_offset(item, "start", where);
    f.end = get_offset(item, "end", where);
    if (!item["attributes"].is_object()) schema_error(where + ".attributes must be an object");
    for (const auto& [k, v] : item["attributes"].items()) {
      if (!v.is_string()) schema_error(where + ".attributes." + k + " must be a string");
      f.attributes[k] = v.get<std::string>();
    }
    doc.push_frame_unchecked(std::move(f));
  }
  i = 0;
  for (const auto& item : value["relations"]) {
    const auto where = "relations[" + std::to_string(i++) + "]";
    require_keys(item, {"frame_1_id", "frame_2_id", "relation_type"}, where);
    Relation r;
    r.frame_1_id = get_string(item, "frame_1_id", where);
    r.frame_2_id = get_string(item, "frame_2_id", where);
    const auto& type = item["relation_type"];
    if (type.is_string()) r.relation_type = type.get<std::string>();
    else if (!type.is_null()) schema_error(where + ".relation_type must be a string or null");
    doc.push_relation_unchecked(std::move(r));
  }
  return doc;
}

std::string serialize(const IEDocument& doc) {
  return to_json(doc).dump(2, ' ', false, ordered_json::error_handler_t::replace) + "\n";
}

IEDocument parse_document(const std::string& text) {
  auto value = json::parse(text, nullptr, false);
  if (value.is_discarded()) schema_error("document is not valid JSON");
  return from_json(value);
}

void save(const IEDocument& doc, const std::filesystem::path& path) {
  const auto report = validate_document(doc);
  if (report.error_count() > 0) {
    throw DocumentError(DocumentError::Kind::invalid_document,
                        "refusing to save document " + doc.doc_id() + ": " + report.findings.front().message);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DocumentError(DocumentError::Kind::io, "cannot write " + path.string());
  out << serialize(doc);
  if (!out) throw DocumentError(DocumentError::Kind::io, "write failed for " + path.string());
}

IEDocument load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DocumentError(DocumentError::Kind::io, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_document(buf.str());
}

std::string ordinal_id(std::size_t ordinal) {
  std::ostringstream os;
  os << std::setw(4) << std::setfill('0') << ordinal;
  return os.str();
}

}  // namespace llmie
