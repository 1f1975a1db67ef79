#include "llmie/render.hpp"

#include <algorithm>
#include <cstdint>
#include <set>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "llmie/unicode.hpp"

namespace llmie {

std::size_t type_color_index(std::string_view type_value) {
  std::uint32_t hash = 2166136261u;
  for (unsigned char c : type_value) {
    hash ^= c;
    hash *= 16777619u;
  }
  return hash % kTypePalette.size();
}

std::string html_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

namespace {

// JSON safe to embed in a <script> element.
std::string script_json(const nlohmann::ordered_json& value) {
  const auto raw = value.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    if (c == '<') out += "\\u003c";
    else if (c == '>') out += "\\u003e";
    else if (c == '&') out += "\\u0026";
    else out.push_back(c);
  }
  return out;
}

constexpr std::string_view kStyle = R"(
body { font-family: sans-serif; margin: 2em; }
.llmie-doc { position: relative; white-space: pre-wrap; line-height: 2.4; }
.llmie-frame { border-radius: 3px; padding: 1px 0; cursor: help; }
.llmie-untyped { background: #dddddd; }
.llmie-arcs { position: absolute; left: 0; top: 0; pointer-events: none; overflow: visible; }
.llmie-arcs path { fill: none; stroke: #555555; stroke-width: 1.5; }
)";

// Draws one path per relation between the first highlight of each endpoint.
constexpr std::string_view kArcScript = R"(
(function () {
  var doc = document.getElementById("llmie-doc");
  var relations = JSON.parse(document.getElementById("llmie-relations").textContent);
  var svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("class", "llmie-arcs");
  svg.setAttribute("width", doc.scrollWidth);
  svg.setAttribute("height", doc.scrollHeight);
  doc.appendChild(svg);
  function anchor(id) {
    var nodes = doc.querySelectorAll(".llmie-frame");
    for (var i = 0; i != nodes.length; i++) {
      if (nodes[i].getAttribute("data-frame-ids").split(" ").indexOf(id) != -1) return nodes[i];
    }
    return null;
  }
  var base = doc.getBoundingClientRect();
  relations.forEach(function (r) {
    var a = anchor(r.frame_1_id), b = anchor(r.frame_2_id);
    if (!a || !b) return;
    var ra = a.getBoundingClientRect(), rb = b.getBoundingClientRect();
    var x1 = ra.left + ra.width / 2 - base.left, y1 = ra.top - base.top;
    var x2 = rb.left + rb.width / 2 - base.left, y2 = rb.top - base.top;
    var lift = Math.min(y1, y2) - 12 - Math.abs(x2 - x1) / 20;
    var path = document.createElementNS("http://www.w3.org/2000/svg", "path");
    path.setAttribute("d", "M" + x1 + "," + y1 + " C" + x1 + "," + lift + " " + x2 + "," + lift + " " + x2 + "," + y2);
    var title = document.createElementNS("http://www.w3.org/2000/svg", "title");
    title.textContent = r.relation_type || "related";
    path.appendChild(title);
    svg.appendChild(path);
  });
})();
)";

}  // namespace

std::string viz_render(const IEDocument& doc, const std::string& type_attribute) {
  const auto& chars = doc.chars();
  const auto& frames = doc.frames();
  std::vector<std::size_t> usable;
  std::set<std::size_t> cuts{0, chars.size()};
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].start < frames[i].end && frames[i].end <= chars.size()) {
      usable.push_back(i);
      cuts.insert(frames[i].start);
      cuts.insert(frames[i].end);
    }
  }

  std::ostringstream html;
  html << "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>"
       << html_escape(doc.doc_id()) << "</title>\n<style>" << kStyle;
  for (std::size_t i = 0; i < kTypePalette.size(); ++i)
    html << ".llmie-color-" << i << " { background: " << kTypePalette[i] << "; }\n";
  html << "</style>\n</head>\n<body>\n<h1>" << html_escape(doc.doc_id()) << "</h1>\n";
  html << "<div class=\"llmie-doc\" id=\"llmie-doc\">";

  for (auto it = cuts.begin(); std::next(it) != cuts.end(); ++it) {
    const auto a = *it;
    const auto b = *std::next(it);
    const auto text = html_escape(unicode::encode(std::u32string_view(chars).substr(a, b - a)));
    std::vector<std::size_t> covering;
    for (auto i : usable)
      if (frames[i].start <= a && frames[i].end >= b) covering.push_back(i);
    if (covering.empty()) {
      html << text;
      continue;
    }
    // The innermost covering frame decides the color.
    const auto inner = *std::min_element(covering.begin(), covering.end(), [&](std::size_t x, std::size_t y) {
      return frames[x].end - frames[x].start < frames[y].end - frames[y].start;
    });
    const auto type = frames[inner].attribute(type_attribute);
    const auto color =
        type.empty() ? std::string("llmie-untyped") : "llmie-color-" + std::to_string(type_color_index(type));

    std::string ids;
    std::string tooltip;
    nlohmann::ordered_json attrs = nlohmann::ordered_json::object();
    for (auto i : covering) {
      const auto& f = frames[i];
      ids += (ids.empty() ? "" : " ") + f.frame_id;
      std::string line = f.frame_id + ":";
      nlohmann::ordered_json one = nlohmann::ordered_json::object();
      for (const auto& [k, v] : f.attributes) {
        line += " " + k + "=" + v;
        one[k] = v;
      }
      tooltip += (tooltip.empty() ? "" : "\n") + line;
      attrs[f.frame_id] = std::move(one);
    }
    std::string tooltip_attr;
    for (char c : html_escape(tooltip)) {
      if (c == '\n') tooltip_attr += "&#10;";
      else tooltip_attr.push_back(c);
    }
    html << "<span class=\"llmie-frame " << color << "\" data-frame-ids=\"" << html_escape(ids)
         << "\" data-attributes=\""
         << html_escape(attrs.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace))
         << "\" title=\"" << tooltip_attr << "\">" << text << "</span>";
  }
  html << "</div>\n";

  nlohmann::ordered_json relations = nlohmann::ordered_json::array();
  for (const auto& r : doc.relations()) {
    relations.push_back({{"frame_1_id", r.frame_1_id},
                         {"frame_2_id", r.frame_2_id},
                         {"relation_type", r.relation_type ? nlohmann::ordered_json(*r.relation_type) : nullptr}});
  }
  html << "<script type=\"application/json\" id=\"llmie-relations\">" << script_json(relations) << "</script>\n";
  html << "<script>" << kArcScript << "</script>\n</body>\n</html>\n";
  return html.str();
}

}  // namespace llmie
