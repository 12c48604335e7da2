#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <limits>
#include <numbers>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lexdial/aggregate.hpp"
#include "lexdial/cluster.hpp"
#include "lexdial/error.hpp"
#include "lexdial/geogrid.hpp"

namespace lexdial {

struct circle_mark {
    cell_id cell;
    double lat = 0;
    double lon = 0;
    double radius = 0;
    std::string key; // dominant variant id or cluster label
    std::uint64_t count = 0;
    bool tie = false;
    std::uint64_t dominant_count = 0;
};

struct legend_entry {
    std::string key;
    std::string label;
    std::string color;
};

struct map_doc {
    std::string title;
    std::string key_name = "variant"; // property name carrying `key`
    double scale = 1.0;              // circle area per observation (concept maps)
    std::vector<circle_mark> marks;  // sorted by cell
    std::vector<legend_entry> legend;

    const legend_entry* find_legend(std::string_view key) const {
        for (const auto& e : legend)
            if (e.key == key) return &e;
        return nullptr;
    }

    void validate() const {
        for (std::size_t i = 0; i < marks.size(); ++i) {
            const auto& m = marks[i];
            if (!(m.radius > 0)) throw error("map: non-positive radius at cell " + to_string(m.cell));
            if (!find_legend(m.key)) throw error("map: color key '" + m.key + "' missing from legend");
            if (i > 0 && !(marks[i - 1].cell < m.cell)) throw error("map: marks not sorted by cell");
        }
    }
};

/// key -> color overrides.
using palette_overrides = std::map<std::string, std::string>;

/// Reads `key<TAB>color` lines; `#` starts a comment.
inline palette_overrides load_palette(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw error("cannot open palette " + path.string());
    palette_overrides out;
    std::string line;
    while (detail::getline_clean(in, line)) {
        if (line.empty() || line.front() == '#') continue;
        auto f = detail::split(line, '\t');
        if (f.size() != 2) throw error("palette: expected key<TAB>color in '" + line + "'");
        out[std::string(f[0])] = std::string(f[1]);
    }
    return out;
}

namespace palettes {

inline const std::vector<std::string> categorical{
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
    "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939", "#8c6d31", "#843c39"};

// Superdialects: α red, β blue.
inline const std::vector<std::string> clusters{"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd",
                                               "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

// Regional subdivisions: blue, orange, green, yellow.
inline const std::vector<std::string> subclusters{"#1f77b4", "#ff7f0e", "#2ca02c", "#f2d21b", "#9467bd",
                                                  "#8c564b", "#e377c2", "#7f7f7f", "#17becf", "#d62728"};

inline std::string pick(const std::vector<std::string>& p, std::size_t i, const palette_overrides& overrides,
                        const std::string& key) {
    if (auto it = overrides.find(key); it != overrides.end()) return it->second;
    return p[i % p.size()];
}

} // namespace palettes

/// Circle radius whose area is scale * count.
inline double area_radius(double scale, std::uint64_t count) {
    return std::sqrt(scale * static_cast<double>(count) / std::numbers::pi);
}

/// One circle per cell where the concept was observed, colored by the
/// dominant variant, with area proportional to the concept's observations in
/// that cell.
inline map_doc concept_map(const counts_table& counts, std::string_view concept_id, double scale = 1.0,
                           const palette_overrides& overrides = {}) {
    if (!(scale > 0)) throw error("concept_map: scale must be positive");
    map_doc doc;
    doc.title = "concept " + std::string(concept_id);
    doc.key_name = "variant";
    doc.scale = scale;
    std::set<std::string> observed;

    for_each_cell_concept(counts, [&](const cell_id& cell, std::string_view cid, std::span<const variant_count> group) {
        if (cid != concept_id) return;
        auto dom = dominant_variant(group);
        if (!dom) return;
        std::uint64_t total = 0;
        for (const auto& vc : group) {
            total += vc.count;
            observed.emplace(vc.variant_id);
        }
        auto center = cell_center(cell, counts.grid);
        doc.marks.push_back({cell, center.lat, center.lon, area_radius(scale, total), dom->variant_id, total,
                             dom->tie, dom->count});
    });
    if (doc.marks.empty()) throw error("concept_map: concept '" + std::string(concept_id) + "' not present in counts");

    std::size_t i = 0;
    for (const auto& v : observed) {
        doc.legend.push_back({v, v, palettes::pick(palettes::categorical, i, overrides, v)});
        ++i;
    }
    return doc;
}

/// One fixed-size circle per clustered cell, colored by cluster label.
inline map_doc cluster_map(const cluster_model& model, double radius = 2.0, const palette_overrides& overrides = {}) {
    if (!(radius > 0)) throw error("cluster_map: radius must be positive");
    map_doc doc;
    doc.title = model.parent ? "subclusters of " + model.parent->label : "clusters";
    doc.key_name = "label";
    const auto& palette = model.parent ? palettes::subclusters : palettes::clusters;
    for (std::size_t j = 0; j < model.labels.size(); ++j)
        doc.legend.push_back({model.labels[j], model.labels[j], palettes::pick(palette, j, overrides, model.labels[j])});

    std::vector<std::size_t> order(model.cells.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return model.cells[a] < model.cells[b]; });
    for (auto r : order) {
        auto center = cell_center(model.cells[r], model.grid);
        doc.marks.push_back({model.cells[r], center.lat, center.lon, radius, model.label_of_row(r), 1, false, 1});
    }
    return doc;
}

/// RFC 7946 FeatureCollection of Point features ([lon, lat] order).
inline std::string emit_geojson(const map_doc& doc) {
    doc.validate();
    using nlohmann::ordered_json;
    ordered_json fc;
    fc["type"] = "FeatureCollection";
    fc["name"] = doc.title;
    ordered_json features = ordered_json::array();
    for (const auto& m : doc.marks) {
        ordered_json f;
        f["type"] = "Feature";
        f["geometry"] = {{"type", "Point"}, {"coordinates", {m.lon, m.lat}}};
        ordered_json props;
        props["cell"] = to_string(m.cell);
        props[doc.key_name] = m.key;
        props["color"] = doc.find_legend(m.key)->color;
        props["count"] = m.count;
        props["dominant_count"] = m.dominant_count;
        props["radius"] = m.radius;
        props["tie"] = m.tie;
        f["properties"] = std::move(props);
        features.push_back(std::move(f));
    }
    fc["features"] = std::move(features);
    ordered_json legend = ordered_json::array();
    for (const auto& e : doc.legend) legend.push_back({{"key", e.key}, {"label", e.label}, {"color", e.color}});
    fc["legend"] = std::move(legend);
    return fc.dump(1) + "\n";
}

namespace detail {

inline std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

inline std::string fixed3(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

} // namespace detail

/// SVG 1.1 with equirectangular placement. Circle radii are in pixels; the
/// data-area attribute carries the exact area (scale * count).
inline std::string emit_svg(const map_doc& doc, double width = 960.0) {
    doc.validate();
    constexpr double margin = 20.0;
    constexpr double legend_width = 180.0;
    constexpr double row_height = 18.0;

    double lon_min = -180, lon_max = 180, lat_min = -90, lat_max = 90;
    double max_r = 0;
    if (!doc.marks.empty()) {
        lon_min = lat_min = std::numeric_limits<double>::infinity();
        lon_max = lat_max = -std::numeric_limits<double>::infinity();
        for (const auto& m : doc.marks) {
            lon_min = std::min(lon_min, m.lon);
            lon_max = std::max(lon_max, m.lon);
            lat_min = std::min(lat_min, m.lat);
            lat_max = std::max(lat_max, m.lat);
            max_r = std::max(max_r, m.radius);
        }
        const double pad = std::max(1.0, 0.05 * std::max(lon_max - lon_min, lat_max - lat_min));
        lon_min -= pad;
        lon_max += pad;
        lat_min -= pad;
        lat_max += pad;
    }
    const double ppd = width / (lon_max - lon_min);
    const double map_h = (lat_max - lat_min) * ppd;
    const double legend_h = static_cast<double>(doc.legend.size()) * row_height + 2 * margin;
    const double total_w = width + 2 * margin + max_r * 2 + legend_width;
    const double total_h = std::max(map_h + 2 * margin + max_r * 2, legend_h);

    std::string out;
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + detail::fixed3(total_w) +
           "\" height=\"" + detail::fixed3(total_h) + "\" viewBox=\"0 0 " + detail::fixed3(total_w) + " " +
           detail::fixed3(total_h) + "\">\n";
    out += "<title>" + detail::xml_escape(doc.title) + "</title>\n";
    out += "<rect x=\"0\" y=\"0\" width=\"" + detail::fixed3(total_w) + "\" height=\"" + detail::fixed3(total_h) +
           "\" fill=\"#ffffff\"/>\n";
    out += "<g id=\"marks\" fill-opacity=\"0.7\">\n";
    const double off = margin + max_r;
    for (const auto& m : doc.marks) {
        const double x = off + (m.lon - lon_min) * ppd;
        const double y = off + (lat_max - m.lat) * ppd;
        out += "<circle cx=\"" + detail::fixed3(x) + "\" cy=\"" + detail::fixed3(y) + "\" r=\"" +
               format_double(m.radius) + "\" fill=\"" + doc.find_legend(m.key)->color + "\" data-cell=\"" +
               to_string(m.cell) + "\" data-key=\"" + detail::xml_escape(m.key) + "\" data-count=\"" +
               std::to_string(m.count) + "\" data-area=\"" +
               format_double(doc.key_name == "variant" ? doc.scale * static_cast<double>(m.count)
                                                       : std::numbers::pi * m.radius * m.radius) +
               "\"/>\n";
    }
    out += "</g>\n<g id=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
    const double lx = total_w - legend_width + 10;
    for (std::size_t i = 0; i < doc.legend.size(); ++i) {
        const double y = margin + static_cast<double>(i) * row_height;
        const auto& e = doc.legend[i];
        out += "<rect x=\"" + detail::fixed3(lx) + "\" y=\"" + detail::fixed3(y) +
               "\" width=\"12\" height=\"12\" fill=\"" + e.color + "\"/>\n";
        out += "<text x=\"" + detail::fixed3(lx + 18) + "\" y=\"" + detail::fixed3(y + 10) + "\">" +
               detail::xml_escape(e.label) + "</text>\n";
    }
    out += "</g>\n</svg>\n";
    return out;
}

} // namespace lexdial
