#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "llmie/errors.hpp"

namespace llmie {

using Attributes = std::map<std::string, std::string>;

// One extracted entity. Offsets count Unicode scalar values, end exclusive.
struct Frame {
  std::string frame_id;
  std::string entity_text;
  std::size_t start = 0;
  std::size_t end = 0;
  Attributes attributes;

  bool operator==(const Frame&) const = default;

  // Value of an attribute, or empty when absent.
  std::string attribute(const std::string& key) const;
};

struct Relation {
  std::string frame_1_id;
  std::string frame_2_id;
  std::optional<std::string> relation_type;

  bool operator==(const Relation&) const = default;
};

class DocumentError : public Error {
 public:
  enum class Kind {
    span_mismatch,
    duplicate_id,
    duplicate_frame,
    unknown_frame_id,
    self_relation,
    invalid_document,
    io,
    schema,
  };

  DocumentError(Kind kind, std::string message);
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

enum class DuplicatePolicy { reject_duplicates, allow };

struct Finding {
  enum class Severity { error, warning };

  Severity severity;
  std::string code;
  std::string message;
  std::vector<std::string> subjects;  // frame ids, or relation endpoints

  bool operator==(const Finding&) const = default;
};

struct ValidationReport {
  std::vector<Finding> findings;

  bool empty() const { return findings.empty(); }
  std::size_t error_count() const;
  std::size_t warning_count() const;

  bool operator==(const ValidationReport&) const = default;
};

// Self-contained document: text plus its frames and relations.
class IEDocument {
 public:
  IEDocument() = default;
  IEDocument(std::string doc_id, std::string text);

  const std::string& doc_id() const { return doc_id_; }
  const std::string& text() const { return text_; }
  const std::vector<Frame>& frames() const { return frames_; }
  const std::vector<Relation>& relations() const { return relations_; }

  // Text length in scalar values.
  std::size_t length() const { return length_; }
  // Decoded text, indexable by frame offsets.
  const std::u32string& chars() const { return chars_; }

  void add_frame(Frame frame, DuplicatePolicy policy = DuplicatePolicy::reject_duplicates);
  void add_relation(Relation relation);

  const Frame* find_frame(const std::string& frame_id) const;
  bool remove_frame(const std::string& frame_id);

  // Unchecked builders used by the loader and by tests of validation.
  void push_frame_unchecked(Frame frame) { frames_.push_back(std::move(frame)); }
  void push_relation_unchecked(Relation relation) { relations_.push_back(std::move(relation)); }

  bool operator==(const IEDocument& other) const {
    return doc_id_ == other.doc_id_ && text_ == other.text_ && frames_ == other.frames_ &&
           relations_ == other.relations_;
  }

 private:
  std::string doc_id_;
  std::string text_;
  std::u32string chars_;
  std::size_t length_ = 0;
  std::vector<Frame> frames_;
  std::vector<Relation> relations_;
};

// Dangling relations and span violations are errors; exact-duplicate frames
// and overlapping spans are warnings.
ValidationReport validate_document(const IEDocument& doc);

inline constexpr int kFormatVersion = 1;

nlohmann::ordered_json to_json(const IEDocument& doc);
IEDocument from_json(const nlohmann::json& value);

// Canonical file text: two-space indentation, trailing newline.
std::string serialize(const IEDocument& doc);
IEDocument parse_document(const std::string& text);

void save(const IEDocument& doc, const std::filesystem::path& path);
IEDocument load(const std::filesystem::path& path);

// Zero-padded ordinal frame ids: 1 -> "0001".
std::string ordinal_id(std::size_t ordinal);

}  // namespace llmie
