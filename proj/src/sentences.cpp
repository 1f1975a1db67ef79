#include <algorithm>
#include <string>
#include <vector>

#include "llmie/parsing.hpp"
#include "llmie/unicode.hpp"

namespace llmie {

const std::vector<std::u32string>& sentence_abbreviations() {
  static const std::vector<std::u32string> list = {
      U"dr.",   U"mr.",   U"mrs.",   U"ms.", U"vs.",   U"e.g.", U"i.e.",
      U"q.d.",  U"b.i.d.", U"t.i.d.", U"p.r.n.", U"mg.", U"a.m.", U"p.m.",
  };
  return list;
}

namespace {

bool is_terminal(char32_t c) { return c == U'.' || c == U'!' || c == U'?'; }

bool is_closer(char32_t c) {
  return c == U'"' || c == U'\'' || c == U')' || c == U']' || c == U'”' || c == U'’';
}

bool is_opener(char32_t c) {
  return c == U'"' || c == U'\'' || c == U'(' || c == U'[' || c == U'“' || c == U'‘';
}

bool is_horizontal_space(char32_t c) { return unicode::is_space(c) && c != U'\n'; }

// True when the whitespace-delimited token ending at `dot` is a known
// abbreviation.
bool ends_abbreviation(std::u32string_view text, std::size_t dot) {
  std::size_t begin = dot;
  while (begin > 0 && !unicode::is_space(text[begin - 1])) --begin;
  while (begin < dot && is_opener(text[begin])) ++begin;
  const auto token = unicode::fold(text.substr(begin, dot + 1 - begin));
  const auto& list = sentence_abbreviations();
  return std::find(list.begin(), list.end(), token) != list.end();
}

// A blank line starts at the newline at i: only horizontal space before the
// next newline.
bool blank_line_at(std::u32string_view text, std::size_t i) {
  std::size_t j = i + 1;
  while (j < text.size() && is_horizontal_space(text[j])) ++j;
  return j < text.size() && text[j] == U'\n';
}

}  // namespace

std::vector<SentenceSpan> split_sentences(std::u32string_view text) {
  std::vector<SentenceSpan> spans;
  constexpr auto kNone = std::u32string_view::npos;
  std::size_t start = kNone;

  auto close = [&](std::size_t end) {
    if (start == kNone) return;
    while (end > start && unicode::is_space(text[end - 1])) --end;
    if (end > start) spans.push_back({unicode::encode(text.substr(start, end - start)), start, end});
    start = kNone;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char32_t c = text[i];
    if (start == kNone) {
      if (unicode::is_space(c)) continue;
      start = i;
    }
    if (c == U'\n' && blank_line_at(text, i)) {
      close(i);
      continue;
    }
    if (!is_terminal(c)) continue;

    std::size_t end = i + 1;
    while (end < text.size() && (is_terminal(text[end]) || is_closer(text[end]))) ++end;
    if (end >= text.size() || !unicode::is_space(text[end])) continue;
    std::size_t next = end;
    while (next < text.size() && unicode::is_space(text[next])) ++next;
    if (next >= text.size()) continue;
    if (!unicode::is_upper(text[next]) && !unicode::is_digit(text[next])) continue;
    // The last terminal character decides abbreviation status.
    std::size_t last_dot = end - 1;
    while (!is_terminal(text[last_dot])) --last_dot;
    if (text[last_dot] == U'.' && ends_abbreviation(text, last_dot)) continue;
    close(end);
    i = end - 1;
  }
  close(text.size());
  return spans;
}

std::vector<SentenceSpan> split_sentences(std::string_view doc_text) {
  const auto chars = unicode::decode(doc_text);
  return split_sentences(std::u32string_view(chars));
}

}  // namespace llmie
