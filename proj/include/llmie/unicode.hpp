#pragma once

#include <cstddef>
#include <string>
#include <string_view>

// Offsets everywhere in the library count Unicode scalar values. Text is
// stored as UTF-8 and decoded to UTF-32 where offset arithmetic is needed.
namespace llmie::unicode {

// Decodes UTF-8; malformed sequences decode to U+FFFD one byte at a time.
std::u32string decode(std::string_view utf8);
std::string encode(std::u32string_view text);

// Number of scalar values in a UTF-8 string (same counting rule as decode).
std::size_t length(std::string_view utf8);

// Slice [start, end) in scalar offsets, re-encoded as UTF-8.
std::string slice(std::string_view utf8, std::size_t start, std::size_t end);

// Simple one-to-one case fold (ASCII, Latin-1, Latin Extended-A, Greek,
// Cyrillic). Length preserving, so offsets map back unchanged.
char32_t fold(char32_t c);
std::u32string fold(std::u32string_view text);

bool is_space(char32_t c);
bool is_upper(char32_t c);
bool is_digit(char32_t c);
bool is_alnum(char32_t c);

}  // namespace llmie::unicode
