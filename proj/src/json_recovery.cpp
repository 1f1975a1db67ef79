#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "llmie/parsing.hpp"

namespace llmie {

namespace {

using json = nlohmann::json;

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_ws(s.back())) s.remove_suffix(1);
  return s;
}

// Content of the first Markdown code fence that looks like it holds JSON;
// the whole text when there is none.
std::string_view strip_fences(std::string_view text) {
  std::size_t pos = 0;
  while ((pos = text.find("```", pos)) != std::string_view::npos) {
    auto body_start = text.find('\n', pos + 3);
    if (body_start == std::string_view::npos) return text;
    ++body_start;
    auto close = text.find("```", body_start);
    auto body = text.substr(body_start, close == std::string_view::npos ? std::string_view::npos : close - body_start);
    if (body.find_first_of("[{") != std::string_view::npos) return body;
    if (close == std::string_view::npos) break;
    pos = close + 3;
  }
  return text;
}

// Index of the first '[' that opens something JSON-shaped, or npos.
std::size_t find_array_start(std::string_view text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '[') continue;
    std::size_t j = i + 1;
    while (j < text.size() && is_ws(text[j])) ++j;
    if (j < text.size() && (text[j] == '{' || text[j] == ']' || text[j] == '"')) return i;
  }
  return std::string_view::npos;
}

char opener_for(char closer) { return closer == '}' ? '{' : '['; }

struct Segments {
  std::vector<std::string_view> items;
  bool terminated = true;
};

// Splits the array opened at `open` into top-level element texts. A closer
// that does not match unwinds the nesting stack, so a broken element cannot
// swallow the rest of the array.
Segments split_array(std::string_view text, std::size_t open) {
  Segments out;
  std::vector<char> stack;
  bool in_string = false;
  bool escaped = false;
  std::size_t seg = open + 1;
  auto push_segment = [&](std::size_t end) {
    auto item = trim(text.substr(seg, end - seg));
    if (!item.empty()) out.items.push_back(item);
  };
  for (std::size_t i = open + 1; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    switch (c) {
      case '"':
        in_string = true;
        break;
      case '{':
      case '[':
        stack.push_back(c);
        break;
      case '}':
      case ']': {
        while (!stack.empty() && stack.back() != opener_for(c)) stack.pop_back();
        if (!stack.empty()) {
          stack.pop_back();
        } else if (c == ']') {
          push_segment(i);
          return out;
        }
        break;
      }
      case ',':
        if (stack.empty()) {
          push_segment(i);
          seg = i + 1;
        }
        break;
      default:
        break;
    }
  }
  push_segment(text.size());
  out.terminated = false;
  return out;
}

// Balanced top-level objects anywhere in the text; an unbalanced tail is
// returned as a final (broken) candidate.
Segments split_objects(std::string_view text) {
  Segments out;
  std::size_t i = 0;
  while ((i = text.find('{', i)) != std::string_view::npos) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    std::size_t j = i;
    for (; j < text.size(); ++j) {
      const char c = text[j];
      if (in_string) {
        if (escaped) escaped = false;
        else if (c == '\\') escaped = true;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}' && --depth == 0) break;
    }
    if (j >= text.size()) {
      out.items.push_back(trim(text.substr(i)));
      out.terminated = false;
      break;
    }
    out.items.push_back(text.substr(i, j + 1 - i));
    i = j + 1;
  }
  return out;
}

// Drops commas that directly precede a closing bracket (outside strings).
std::string remove_trailing_commas(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      out.push_back(c);
      continue;
    }
    if (c == '"') in_string = true;
    if (c == ',') {
      std::size_t j = i + 1;
      while (j < text.size() && is_ws(text[j])) ++j;
      if (j < text.size() && (text[j] == '}' || text[j] == ']')) continue;
    }
    out.push_back(c);
  }
  return out;
}

json parse_element(std::string_view item) {
  auto value = json::parse(item.begin(), item.end(), nullptr, false);
  if (!value.is_discarded()) return value;
  const auto repaired = remove_trailing_commas(item);
  if (repaired.size() == item.size()) return value;
  return json::parse(repaired, nullptr, false);
}

std::string attribute_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string preview(std::string_view item) {
  constexpr std::size_t kMax = 60;
  if (item.size() <= kMax) return std::string(item);
  return std::string(item.substr(0, kMax)) + "...";
}

}  // namespace

EntityParse extract_json_entities(std::string_view llm_output) {
  EntityParse result;
  const auto body = strip_fences(llm_output);

  Segments segments;
  const auto open = find_array_start(body);
  if (open != std::string_view::npos) {
    segments = split_array(body, open);
    if (!segments.terminated) result.notes.push_back("JSON list is not terminated; recovered the elements present");
  } else {
    segments = split_objects(body);
    if (segments.items.empty()) {
      result.notes.push_back("no JSON list or object found in the output");
      return result;
    }
  }

  for (std::size_t k = 0; k < segments.items.size(); ++k) {
    const auto item = segments.items[k];
    const auto label = "element " + std::to_string(k) + " ";
    auto discard = [&](const std::string& why) {
      ++result.discarded;
      result.notes.push_back(label + why + ": " + preview(item));
    };

    const auto value = parse_element(item);
    if (value.is_discarded()) {
      discard("is not valid JSON");
      continue;
    }
    if (!value.is_object()) {
      discard("is not a JSON object");
      continue;
    }
    if (!value.contains("entity_text")) {
      discard("lacks the entity_text key");
      continue;
    }
    const auto& text = value["entity_text"];
    if (!text.is_string()) {
      discard("has a non-string entity_text");
      continue;
    }
    RawEntityRecord record{text.get<std::string>(), {}};
    if (trim(record.entity_text).empty()) {
      discard("has an empty entity_text");
      continue;
    }
    if (value.contains("attr")) {
      const auto& attr = value["attr"];
      if (attr.is_object()) {
        for (const auto& [key, v] : attr.items()) {
          if (!v.is_null()) record.attributes[key] = attribute_text(v);
        }
      } else if (!attr.is_null()) {
        result.notes.push_back(label + "has a non-object attr; attributes ignored");
      }
    }
    result.records.push_back(std::move(record));
  }
  return result;
}

}  // namespace llmie
