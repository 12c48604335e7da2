#include <gtest/gtest.h>

#include <cstdint>
#include <random>
#include <string>

#include "lexdial/geogrid.hpp"

using namespace lexdial;

namespace {

/// Exact floor((x + offset) * 60 / arcmin) for x given as a decimal string
/// with up to 6 fractional digits, using integer arithmetic only.
std::int64_t exact_index(const std::string& decimal, std::int64_t offset_deg, std::int64_t arcmin) {
    std::int64_t sign = 1;
    std::string s = decimal;
    if (s[0] == '-') {
        sign = -1;
        s = s.substr(1);
    }
    auto dot = s.find('.');
    std::string whole = s.substr(0, dot);
    std::string frac = dot == std::string::npos ? "" : s.substr(dot + 1);
    frac.resize(6, '0');
    const std::int64_t scale = 1000000;
    std::int64_t micro = sign * (std::stoll(whole) * scale + std::stoll(frac));
    std::int64_t num = (micro + offset_deg * scale) * 60;
    std::int64_t den = arcmin * scale;
    return num / den; // non-negative numerator, so truncation is floor
}

} // namespace

TEST(GeoGrid, OriginCorner) {
    grid_spec g;
    EXPECT_EQ(cell_of(-90, -180, g), (cell_id{0, 0}));
}

TEST(GeoGrid, EquatorMeridianMatchesExactOracle) {
    grid_spec g;
    EXPECT_EQ(exact_index("0", 180, 25), 432);
    EXPECT_EQ(exact_index("0", 90, 25), 216);
    EXPECT_EQ(cell_of(0, 0, g), (cell_id{432, 216}));
}

TEST(GeoGrid, MadridMatchesExactOracle) {
    grid_spec g;
    const auto ix = exact_index("-3.7038", 180, 25);
    const auto iy = exact_index("40.4168", 90, 25);
    EXPECT_EQ(ix, 423);
    EXPECT_EQ(iy, 313);
    EXPECT_EQ(cell_of(40.4168, -3.7038, g), (cell_id{423, 313}));
}

TEST(GeoGrid, RandomCoordinatesMatchExactOracle) {
    std::mt19937_64 gen(7);
    for (int arcmin : {25, 15, 60, 7}) {
        grid_spec g{static_cast<double>(arcmin)};
        for (int i = 0; i < 2000; ++i) {
            // Random coordinates with 4 decimals, away from the clamped edges.
            std::int64_t lat4 = static_cast<std::int64_t>(gen() % 1799999) - 899999;
            std::int64_t lon4 = static_cast<std::int64_t>(gen() % 3599999) - 1799999;
            auto dec = [](std::int64_t v) {
                std::string sign = v < 0 ? "-" : "";
                v = v < 0 ? -v : v;
                std::string frac = std::to_string(v % 10000);
                return sign + std::to_string(v / 10000) + "." + std::string(4 - frac.size(), '0') + frac;
            };
            const std::string lat_s = dec(lat4), lon_s = dec(lon4);
            auto c = cell_of(std::stod(lat_s), std::stod(lon_s), g);
            EXPECT_EQ(c.ix, exact_index(lon_s, 180, arcmin)) << lon_s;
            EXPECT_EQ(c.iy, exact_index(lat_s, 90, arcmin)) << lat_s;
        }
    }
}

TEST(GeoGrid, NorthAndEastEdgesClamp) {
    grid_spec g;
    EXPECT_EQ(g.columns(), 864);
    EXPECT_EQ(g.rows(), 432);
    EXPECT_EQ(cell_of(90, 180, g), (cell_id{863, 431}));
    grid_spec odd{7};
    EXPECT_EQ(odd.columns(), 3086); // ceil(21600 / 7)
    EXPECT_EQ(cell_of(90, 180, odd), (cell_id{3085, 1542}));
}

TEST(GeoGrid, OutOfRangeThrows) {
    grid_spec g;
    EXPECT_THROW(cell_of(90.0001, 0, g), error);
    EXPECT_THROW(cell_of(0, -180.5, g), error);
    EXPECT_THROW(grid_spec{0}.validate(), error);
    EXPECT_THROW(grid_spec{3601}.validate(), error);
}

TEST(GeoGrid, CellCenters) {
    grid_spec g;
    auto c0 = cell_center({0, 0}, g);
    EXPECT_NEAR(c0.lat, -90 + 12.5 / 60, 1e-12);
    EXPECT_NEAR(c0.lon, -180 + 12.5 / 60, 1e-12);
    EXPECT_NEAR(c0.lat, -89.791666666666667, 1e-12);
    auto c1 = cell_center({432, 216}, g);
    EXPECT_NEAR(c1.lat, 0.2083333333333333, 1e-12);
    EXPECT_NEAR(c1.lon, 0.2083333333333333, 1e-12);
    EXPECT_THROW(cell_center({864, 0}, g), error);
    EXPECT_THROW(cell_center({-1, 0}, g), error);
}

TEST(GeoGrid, CenterRoundTripsForEveryCell) {
    for (double arcmin : {25.0, 60.0, 600.0, 7.0}) {
        grid_spec g{arcmin};
        for (std::int32_t iy = 0; iy < g.rows(); iy += std::max(1, g.rows() / 97)) {
            for (std::int32_t ix = 0; ix < g.columns(); ix += std::max(1, g.columns() / 89)) {
                cell_id c{ix, iy};
                auto p = cell_center(c, g);
                EXPECT_EQ(cell_of(p.lat, p.lon, g), c);
            }
        }
    }
}

TEST(GeoGrid, NearbyPointsShareACell) {
    grid_spec g;
    const double quarter = g.cell_degrees() / 4;
    auto center = cell_center({423, 313}, g);
    EXPECT_EQ(cell_of(center.lat + quarter, center.lon - quarter, g), (cell_id{423, 313}));
    EXPECT_EQ(cell_of(center.lat - quarter, center.lon + quarter, g), (cell_id{423, 313}));
}

TEST(GeoGrid, SerializationFormat) {
    EXPECT_EQ(to_string(cell_id{423, 313}), "423_313");
    EXPECT_EQ(parse_cell_id("423_313"), (cell_id{423, 313}));
    EXPECT_THROW(parse_cell_id("423-313"), error);
    EXPECT_THROW(parse_cell_id("_3"), error);
    EXPECT_THROW(parse_cell_id("1_x"), error);
}

TEST(GeoGrid, OrderingIsRowMajor) {
    EXPECT_LT((cell_id{500, 1}), (cell_id{0, 2}));
    EXPECT_LT((cell_id{1, 2}), (cell_id{2, 2}));
}
