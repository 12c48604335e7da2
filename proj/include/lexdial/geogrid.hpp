#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

#include "lexdial/error.hpp"

namespace lexdial {

/// Equirectangular lat/lon grid with square cells measured in arc-minutes.
struct grid_spec {
    double cell_size_arcmin = 25.0;

    void validate() const {
        if (!(cell_size_arcmin > 0.0 && cell_size_arcmin <= 3600.0))
            throw error("cell size must be in (0, 3600] arc-minutes, got " + std::to_string(cell_size_arcmin));
    }

    double cell_degrees() const { return cell_size_arcmin / 60.0; }
    std::int32_t columns() const { return static_cast<std::int32_t>(std::ceil(360.0 * 60.0 / cell_size_arcmin)); }
    std::int32_t rows() const { return static_cast<std::int32_t>(std::ceil(180.0 * 60.0 / cell_size_arcmin)); }

    bool operator==(const grid_spec&) const = default;
};

/// Cell index: ix counts columns eastward from -180, iy rows northward from -90.
/// Ordering is row-major by (iy, ix).
struct cell_id {
    std::int32_t ix = 0;
    std::int32_t iy = 0;

    friend bool operator==(const cell_id&, const cell_id&) = default;
    friend std::strong_ordering operator<=>(const cell_id& a, const cell_id& b) {
        if (auto c = a.iy <=> b.iy; c != 0) return c;
        return a.ix <=> b.ix;
    }

    std::uint64_t packed() const {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(iy)) << 32) |
               static_cast<std::uint32_t>(ix);
    }
    static cell_id unpack(std::uint64_t v) {
        return {static_cast<std::int32_t>(v & 0xFFFFFFFFu), static_cast<std::int32_t>(v >> 32)};
    }
};

struct lat_lon {
    double lat;
    double lon;
};

inline bool valid_coordinates(double lat, double lon) {
    return lat >= -90.0 && lat <= 90.0 && lon >= -180.0 && lon <= 180.0;
}

inline cell_id cell_of(double lat, double lon, const grid_spec& grid) {
    if (!valid_coordinates(lat, lon))
        throw error("coordinates out of range: lat=" + std::to_string(lat) + " lon=" + std::to_string(lon));
    auto ix = static_cast<std::int32_t>(std::floor((lon + 180.0) * 60.0 / grid.cell_size_arcmin));
    auto iy = static_cast<std::int32_t>(std::floor((lat + 90.0) * 60.0 / grid.cell_size_arcmin));
    // The east and north edges belong to the last column and row.
    ix = std::min(ix, grid.columns() - 1);
    iy = std::min(iy, grid.rows() - 1);
    return {ix, iy};
}

inline bool valid_cell(const cell_id& cell, const grid_spec& grid) {
    return cell.ix >= 0 && cell.ix < grid.columns() && cell.iy >= 0 && cell.iy < grid.rows();
}

inline lat_lon cell_center(const cell_id& cell, const grid_spec& grid) {
    if (!valid_cell(cell, grid))
        throw error("invalid cell " + std::to_string(cell.ix) + "_" + std::to_string(cell.iy));
    const double s = grid.cell_degrees();
    return {-90.0 + (cell.iy + 0.5) * s, -180.0 + (cell.ix + 0.5) * s};
}

/// `ix_iy`, e.g. `423_313`.
inline std::string to_string(const cell_id& cell) {
    return std::to_string(cell.ix) + "_" + std::to_string(cell.iy);
}

inline cell_id parse_cell_id(std::string_view text) {
    auto sep = text.find('_');
    if (sep == std::string_view::npos) throw error("malformed cell id '" + std::string(text) + "'");
    cell_id c;
    auto parse = [&](std::string_view part, std::int32_t& out) {
        auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
        if (ec != std::errc() || p != part.data() + part.size() || part.empty())
            throw error("malformed cell id '" + std::string(text) + "'");
    };
    parse(text.substr(0, sep), c.ix);
    parse(text.substr(sep + 1), c.iy);
    return c;
}

} // namespace lexdial
