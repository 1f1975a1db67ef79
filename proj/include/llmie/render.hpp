#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>

#include "llmie/datamodel.hpp"

namespace llmie {

inline constexpr std::array<std::string_view, 12> kTypePalette = {
    "#f4a261", "#8ecae6", "#90be6d", "#f28482", "#cdb4db", "#ffd166",
    "#76c893", "#a2d2ff", "#e9c46a", "#ffafcc", "#b5e48c", "#d4a373",
};

// Palette slot for a Type value: FNV-1a hash modulo the palette size.
std::size_t type_color_index(std::string_view type_value);

std::string html_escape(std::string_view text);

// Self-contained HTML page: text partitioned at every frame boundary, each
// covered segment wrapped in a highlight span, relations embedded as JSON.
std::string viz_render(const IEDocument& doc, const std::string& type_attribute = "Type");

}  // namespace llmie
