#pragma once

// Shared test helpers and independent oracles. Nothing here calls into the
// library code it is used to check.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "llmie/datamodel.hpp"
#include "llmie/engine.hpp"

namespace llmie::test {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(LLMIE_TEST_FIXTURES) / name;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

// Fresh directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "llmie") {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::shared_ptr<ScriptedEngine> scripted(std::vector<ScriptRule> rules) {
  return std::make_shared<ScriptedEngine>(std::move(rules));
}

// ---- UTF-32 helpers independent of the library decoder ---------------------

inline std::u32string ascii32(const std::string& s) { return std::u32string(s.begin(), s.end()); }

// Minimal UTF-8 encoder for well-formed scalars.
inline std::string utf8(std::u32string_view text) {
  std::string out;
  for (char32_t c : text) {
    if (c < 0x80) {
      out += char(c);
    } else if (c < 0x800) {
      out += char(0xC0 | (c >> 6));
      out += char(0x80 | (c & 0x3F));
    } else if (c < 0x10000) {
      out += char(0xE0 | (c >> 12));
      out += char(0x80 | ((c >> 6) & 0x3F));
      out += char(0x80 | (c & 0x3F));
    } else {
      out += char(0xF0 | (c >> 18));
      out += char(0x80 | ((c >> 12) & 0x3F));
      out += char(0x80 | ((c >> 6) & 0x3F));
      out += char(0x80 | (c & 0x3F));
    }
  }
  return out;
}

// ---- Random generators -----------------------------------------------------

class Gen {
 public:
  explicit Gen(std::uint32_t seed) : rng_(seed) {}

  std::size_t uniform(std::size_t lo, std::size_t hi) {  // inclusive
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }
  template <typename T>
  const T& pick(const std::vector<T>& items) {
    return items[uniform(0, items.size() - 1)];
  }

  // Clinical-flavoured text: words, punctuation, abbreviations, newlines and
  // some non-ASCII letters.
  std::u32string document(std::size_t words) {
    static const std::vector<std::u32string> vocab = {
        U"aspirin", U"Aspirin", U"daily",  U"He",     U"She",    U"takes",  U"mg",   U"81",     U"Dr.",
        U"Smith",   U"e.g.",    U"b.i.d.", U"p.r.n.", U"pain",   U"nausea", U"was",  U"given",  U"The",
        U"patient", U"Müller",  U"café",   U"Ωmega",  U"дозa",   U"q.d.",   U"vs.",  U"BP",     U"120/80",
        U"i.e.",    U"Mrs.",    U"fever",  U"3",      U"tablet", U"x",      U"a.m.", U"Ibuprofen"};
    static const std::vector<std::u32string> seps = {U" ", U" ", U" ", U"  ", U"\n", U"\n\n", U"\t", U" \n "};
    static const std::vector<std::u32string> ends = {U".", U"!", U"?", U".)", U".\"", U""};
    std::u32string out;
    if (chance(0.2)) out += pick(seps);
    for (std::size_t i = 0; i < words; ++i) {
      out += pick(vocab);
      if (chance(0.2)) out += pick(ends);
      if (chance(0.05)) out += U",";
      if (i + 1 < words) out += pick(seps);
    }
    if (chance(0.3)) out += pick(seps);
    return out;
  }

  std::mt19937& engine() { return rng_; }

 private:
  std::mt19937 rng_;
};

// Document with random frames (valid spans, random attributes, possibly
// overlapping) and random relations between distinct frames.
inline IEDocument random_document(Gen& gen, const std::string& doc_id, std::size_t max_frames = 8) {
  static const std::vector<std::string> types = {"Drug", "Dosage", "Condition", "ADE"};
  static const std::vector<std::string> values = {"pos", "neg", "Ünï", "a \"quoted\" \\ value", "", "line\nbreak"};
  const auto chars = gen.document(gen.uniform(0, 25));
  IEDocument doc(doc_id, utf8(chars));
  const auto n = chars.empty() ? 0 : gen.uniform(0, max_frames);
  for (std::size_t i = 0; i < n; ++i) {
    Frame f;
    f.frame_id = "f" + std::to_string(i);
    f.start = gen.uniform(0, chars.size() - 1);
    f.end = gen.uniform(f.start + 1, std::min(chars.size(), f.start + 12));
    f.entity_text = utf8(std::u32string_view(chars).substr(f.start, f.end - f.start));
    if (gen.chance(0.9)) f.attributes["Type"] = gen.pick(types);
    if (gen.chance(0.4)) f.attributes["Assertion"] = gen.pick(values);
    doc.push_frame_unchecked(std::move(f));
  }
  if (n >= 2) {
    const auto m = gen.uniform(0, 4);
    for (std::size_t k = 0; k < m; ++k) {
      const auto a = gen.uniform(0, n - 1);
      auto b = gen.uniform(0, n - 2);
      if (b >= a) ++b;
      Relation r{"f" + std::to_string(a), "f" + std::to_string(b), std::nullopt};
      if (gen.chance(0.6)) r.relation_type = gen.pick(types) + "-Drug";
      doc.push_relation_unchecked(std::move(r));
    }
  }
  return doc;
}

// ---- Oracles ---------------------------------------------------------------

// Maximum bipartite matching by exhaustive search over assignments; `ok(p, g)`
// tells whether pred p may be matched to gold g.
inline std::size_t brute_force_max_matching(std::size_t n_pred, std::size_t n_gold,
                                            const std::function<bool(std::size_t, std::size_t)>& ok) {
  std::vector<bool> used(n_pred, false);
  std::function<std::size_t(std::size_t)> best = [&](std::size_t g) -> std::size_t {
    if (g == n_gold) return 0;
    std::size_t result = best(g + 1);  // leave gold g unmatched
    for (std::size_t p = 0; p < n_pred; ++p) {
      if (used[p] || !ok(p, g)) continue;
      used[p] = true;
      result = std::max(result, 1 + best(g + 1));
      used[p] = false;
    }
    return result;
  };
  return best(0);
}

// Checks that `[E1]`/`[/E1]`/`[E2]`/`[/E2]` each occur once and nest properly.
inline bool markers_balanced(const std::string& text) {
  std::vector<std::string> stack;
  std::size_t opens = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    for (const std::string tag : {"E1", "E2"}) {
      const std::string open = "[" + tag + "]";
      const std::string close = "[/" + tag + "]";
      if (text.compare(i, open.size(), open) == 0) {
        stack.push_back(tag);
        ++opens;
      } else if (text.compare(i, close.size(), close) == 0) {
        if (stack.empty() || stack.back() != tag) return false;
        stack.pop_back();
      }
    }
  }
  return stack.empty() && opens == 2;
}

inline std::string strip_markers(std::string text) {
  for (const std::string tag : {"[E1]", "[/E1]", "[E2]", "[/E2]"}) {
    std::size_t pos;
    while ((pos = text.find(tag)) != std::string::npos) text.erase(pos, tag.size());
  }
  return text;
}

// Strict well-formedness check for the HTML subset the renderer emits: every
// non-void element closes in order, attribute values are quoted, and text
// outside tags contains no raw '<' or unescaped '&'. Script bodies are skipped.
// Returns an empty string when well formed, otherwise a description.
inline std::string html_wellformed(const std::string& html) {
  static const std::vector<std::string> kVoid = {"meta", "br", "link", "img", "input", "hr"};
  std::vector<std::string> stack;
  std::size_t i = 0;
  if (html.rfind("<!DOCTYPE html>", 0) == 0) i = 15;
  while (i < html.size()) {
    const char c = html[i];
    if (c == '&') {
      const auto semi = html.find(';', i);
      if (semi == std::string::npos || semi - i > 8) return "bare ampersand at " + std::to_string(i);
      i = semi + 1;
      continue;
    }
    if (c != '<') {
      if (c == '>') return "stray > at " + std::to_string(i);
      ++i;
      continue;
    }
    const bool closing = i + 1 < html.size() && html[i + 1] == '/';
    std::size_t j = i + (closing ? 2 : 1);
    std::string name;
    while (j < html.size() && (std::isalnum(static_cast<unsigned char>(html[j])) || html[j] == '-')) name += html[j++];
    if (name.empty()) return "bad tag at " + std::to_string(i);
    for (auto& ch : name) ch = char(std::tolower(static_cast<unsigned char>(ch)));
    // Attributes: name="value" pairs only.
    while (j < html.size() && html[j] != '>') {
      if (html[j] == '"') {
        const auto close = html.find('"', j + 1);
        if (close == std::string::npos) return "unterminated attribute in <" + name + ">";
        if (html.substr(j + 1, close - j - 1).find('<') != std::string::npos) return "raw < inside attribute";
        j = close + 1;
      } else if (html[j] == '<') {
        return "< inside tag <" + name + ">";
      } else {
        ++j;
      }
    }
    if (j >= html.size()) return "unterminated tag <" + name + ">";
    i = j + 1;
    if (closing) {
      if (stack.empty() || stack.back() != name) return "mismatched </" + name + ">";
      stack.pop_back();
      continue;
    }
    if (std::find(kVoid.begin(), kVoid.end(), name) != kVoid.end()) continue;
    if (name == "script" || name == "style") {
      const auto end = html.find("</" + name + ">", i);
      if (end == std::string::npos) return "unterminated <" + name + ">";
      i = end + name.size() + 3;
      continue;
    }
    stack.push_back(name);
  }
  if (!stack.empty()) return "unclosed <" + stack.back() + ">";
  return {};
}

inline std::string html_unescape(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out += s[i];
      continue;
    }
    const auto semi = s.find(';', i);
    const auto entity = s.substr(i, semi - i + 1);
    if (entity == "&amp;") out += '&';
    else if (entity == "&lt;") out += '<';
    else if (entity == "&gt;") out += '>';
    else if (entity == "&quot;") out += '"';
    else if (entity == "&#39;") out += '\'';
    else out += entity;
    i = semi;
  }
  return out;
}

// Visible text of the element with the given id: tags dropped, entities
// decoded. Assumes the element contains no nested element with the same tag
// name as itself closing early, which holds for the renderer's <div>.
inline std::string element_text(const std::string& html, const std::string& id) {
  const auto open = html.find("id=\"" + id + "\"");
  if (open == std::string::npos) return {};
  std::size_t i = html.find('>', open) + 1;
  std::string raw;
  int depth = 1;
  while (i < html.size() && depth > 0) {
    if (html[i] == '<') {
      const bool closing = html[i + 1] == '/';
      const auto end = html.find('>', i);
      const std::string tag = html.substr(i, end - i);
      if (tag.rfind("<div", 0) == 0) ++depth;
      if (closing && tag.rfind("</div", 0) == 0) --depth;
      i = end + 1;
      continue;
    }
    raw += html[i++];
  }
  return html_unescape(raw);
}

inline std::size_t count_occurrences(const std::string& haystack, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace llmie::test
