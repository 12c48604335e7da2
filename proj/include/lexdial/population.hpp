#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lexdial/aggregate.hpp"
#include "lexdial/cluster.hpp"
#include "lexdial/error.hpp"
#include "lexdial/geogrid.hpp"

namespace lexdial {

/// ESRI ASCII grid. Row 0 of `values` is the northernmost row, as in the file.
struct raster {
    std::size_t ncols = 0;
    std::size_t nrows = 0;
    double xllcorner = 0;
    double yllcorner = 0;
    double cellsize = 0;
    std::optional<double> nodata;
    std::vector<double> values;

    /// Value at a coordinate by nearest raster cell; nullopt when outside the
    /// raster or nodata.
    std::optional<double> sample(double lat, double lon) const {
        const double col = std::floor((lon - xllcorner) / cellsize);
        const double row_from_south = std::floor((lat - yllcorner) / cellsize);
        if (col < 0 || row_from_south < 0 || col >= static_cast<double>(ncols) ||
            row_from_south >= static_cast<double>(nrows))
            return std::nullopt;
        const auto r = nrows - 1 - static_cast<std::size_t>(row_from_south);
        const double v = values[r * ncols + static_cast<std::size_t>(col)];
        if (nodata && v == *nodata) return std::nullopt;
        if (std::isnan(v)) return std::nullopt;
        return v;
    }
};

inline raster parse_raster(std::istream& in, const std::string& source = "<raster>") {
    raster r;
    std::map<std::string, std::string> header;
    bool center_registered = false;
    std::string token;

    // Header: keyword/value pairs until the first numeric token.
    while (in >> token) {
        const unsigned char c0 = static_cast<unsigned char>(token[0]);
        if (std::isdigit(c0) || token[0] == '-' || token[0] == '+' || token[0] == '.') break;
        std::string key = token;
        std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
        std::string value;
        if (!(in >> value)) throw error(source + ": header keyword '" + token + "' has no value");
        header[key] = value;
        token.clear();
    }

    auto need = [&](const char* key) -> const std::string& {
        auto it = header.find(key);
        if (it == header.end()) throw error(source + ": missing header '" + key + "'");
        return it->second;
    };
    r.ncols = parse_integer<std::size_t>(need("ncols"), "ncols");
    r.nrows = parse_integer<std::size_t>(need("nrows"), "nrows");
    r.cellsize = parse_double(need("cellsize"), "cellsize");
    if (header.count("xllcorner")) {
        r.xllcorner = parse_double(header["xllcorner"], "xllcorner");
        r.yllcorner = parse_double(need("yllcorner"), "yllcorner");
    } else {
        r.xllcorner = parse_double(need("xllcenter"), "xllcenter");
        r.yllcorner = parse_double(need("yllcenter"), "yllcenter");
        center_registered = true;
    }
    if (center_registered) {
        r.xllcorner -= r.cellsize / 2;
        r.yllcorner -= r.cellsize / 2;
    }
    if (auto it = header.find("nodata_value"); it != header.end()) r.nodata = parse_double(it->second, "NODATA_value");
    if (r.ncols == 0 || r.nrows == 0) throw error(source + ": raster dimensions must be positive");
    if (!(r.cellsize > 0)) throw error(source + ": cellsize must be positive");

    // Values are read line by line so a wrong row count is caught exactly.
    std::string rest;
    std::getline(in, rest);
    std::vector<std::vector<double>> rows;
    auto push_row = [&](std::istringstream& line_in, std::vector<double> row) {
        std::string v;
        while (line_in >> v) row.push_back(parse_double(v, "raster value"));
        if (!row.empty()) rows.push_back(std::move(row));
    };
    {
        std::vector<double> first;
        if (!token.empty()) first.push_back(parse_double(token, "raster value"));
        std::istringstream line_in(rest);
        push_row(line_in, std::move(first));
    }
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream line_in(line);
        push_row(line_in, {});
    }
    if (rows.size() != r.nrows)
        throw error(source + ": header says " + std::to_string(r.nrows) + " rows, found " + std::to_string(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != r.ncols)
            throw error(source + ": row " + std::to_string(i + 1) + " has " + std::to_string(rows[i].size()) +
                        " values, expected " + std::to_string(r.ncols));
        r.values.insert(r.values.end(), rows[i].begin(), rows[i].end());
    }
    return r;
}

inline raster load_raster(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw error("cannot open raster " + path.string());
    return parse_raster(in, path.string());
}

struct histogram_bin {
    double lower; // log10(1 + population) bin edges
    double upper;
    std::size_t count;
};

struct cluster_population {
    std::string label;
    std::size_t n_cells = 0; // cells with a population value
    std::size_t missing = 0; // cells outside the raster or nodata
    double mean = 0;
    double p25 = 0;
    double p50 = 0;
    double p75 = 0;
    std::vector<double> samples; // sorted
    std::vector<histogram_bin> histogram;
};

/// Linear-interpolated quantile of sorted data (type 7).
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0;
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Half-decade bins over log10(1 + population).
inline std::vector<histogram_bin> log_histogram(const std::vector<double>& samples, double bin_width = 0.5) {
    std::map<long, std::size_t> bins;
    for (double v : samples) bins[static_cast<long>(std::floor(std::log10(1.0 + std::max(0.0, v)) / bin_width))]++;
    std::vector<histogram_bin> out;
    for (const auto& [b, n] : bins)
        out.push_back({static_cast<double>(b) * bin_width, static_cast<double>(b + 1) * bin_width, n});
    return out;
}

/// Per-cluster population summary, sampling the raster at each cell center.
inline std::vector<cluster_population> cluster_population_stats(const cluster_model& model, const raster& pop) {
    std::vector<cluster_population> out(model.labels.size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j].label = model.labels[j];
    for (std::size_t r = 0; r < model.cells.size(); ++r) {
        auto& s = out.at(model.result.assignments[r]);
        auto center = cell_center(model.cells[r], model.grid);
        if (auto v = pop.sample(center.lat, center.lon)) s.samples.push_back(*v);
        else ++s.missing;
    }
    std::size_t covered = 0;
    for (auto& s : out) {
        std::sort(s.samples.begin(), s.samples.end());
        s.n_cells = s.samples.size();
        covered += s.n_cells;
        if (s.samples.empty()) continue;
        double sum = 0;
        for (double v : s.samples) sum += v;
        s.mean = sum / static_cast<double>(s.n_cells);
        s.p25 = quantile_sorted(s.samples, 0.25);
        s.p50 = quantile_sorted(s.samples, 0.50);
        s.p75 = quantile_sorted(s.samples, 0.75);
        s.histogram = log_histogram(s.samples);
    }
    if (covered == 0) throw error("population: raster does not cover any clustered cell");
    return out;
}

inline void write_population_stats(std::ostream& out, const std::vector<cluster_population>& stats) {
    out << "label\tn_cells\tmean\tp25\tp50\tp75\tmissing\n";
    for (const auto& s : stats)
        out << s.label << '\t' << s.n_cells << '\t' << format_double(s.mean) << '\t' << format_double(s.p25) << '\t'
            << format_double(s.p50) << '\t' << format_double(s.p75) << '\t' << s.missing << '\n';
}

inline void write_population_histogram(std::ostream& out, const std::vector<cluster_population>& stats) {
    out << "label\tlog10_lower\tlog10_upper\tcount\n";
    for (const auto& s : stats)
        for (const auto& b : s.histogram)
            out << s.label << '\t' << format_double(b.lower) << '\t' << format_double(b.upper) << '\t' << b.count << '\n';
}

} // namespace lexdial
