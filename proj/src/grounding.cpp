#include <string>
#include <vector>

#include "llmie/parsing.hpp"
#include "llmie/unicode.hpp"

namespace llmie {

namespace {

struct Normalized {
  std::u32string text;
  std::vector<std::size_t> origin;  // index in the source for each char of text
};

// Collapses whitespace runs to one space and case-folds; keeps a map back
// to source offsets. Leading/trailing whitespace is dropped when trim is set.
Normalized normalize(std::u32string_view source, std::size_t offset, bool trim) {
  Normalized out;
  bool pending_space = false;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const char32_t c = source[i];
    if (unicode::is_space(c)) {
      if (!pending_space && !(trim && out.text.empty())) {
        out.text.push_back(U' ');
        out.origin.push_back(offset + i);
      }
      pending_space = true;
      continue;
    }
    pending_space = false;
    out.text.push_back(unicode::fold(c));
    out.origin.push_back(offset + i);
  }
  if (trim && !out.text.empty() && out.text.back() == U' ') {
    out.text.pop_back();
    out.origin.pop_back();
  }
  return out;
}

}  // namespace

std::optional<GroundedSpan> ground_entity(std::u32string_view doc_text, std::string_view entity_text,
                                          std::size_t cursor) {
  if (cursor > doc_text.size()) return std::nullopt;
  const auto needle = unicode::decode(entity_text);
  if (needle.empty()) return std::nullopt;
  const auto tail = doc_text.substr(cursor);

  auto hit = [&](std::size_t start, std::size_t end) { return GroundedSpan{start, end, end}; };

  if (auto pos = tail.find(needle); pos != std::u32string_view::npos)
    return hit(cursor + pos, cursor + pos + needle.size());

  const auto folded_needle = unicode::fold(needle);
  if (auto pos = unicode::fold(tail).find(folded_needle); pos != std::u32string::npos)
    return hit(cursor + pos, cursor + pos + needle.size());

  const auto norm_needle = normalize(needle, 0, true);
  if (norm_needle.text.empty()) return std::nullopt;
  const auto norm_tail = normalize(tail, cursor, false);
  if (auto pos = norm_tail.text.find(norm_needle.text); pos != std::u32string::npos) {
    const auto last = pos + norm_needle.text.size() - 1;
    return hit(norm_tail.origin[pos], norm_tail.origin[last] + 1);
  }
  return std::nullopt;
}

std::optional<GroundedSpan> ground_entity(std::string_view doc_text, std::string_view entity_text,
                                          std::size_t cursor) {
  const auto chars = unicode::decode(doc_text);
  return ground_entity(std::u32string_view(chars), entity_text, cursor);
}

}  // namespace llmie
