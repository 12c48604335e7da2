#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <tuple>
#include <utility>
#include <vector>

#include "lexdial/error.hpp"
#include "lexdial/geogrid.hpp"
#include "lexdial/lexicon.hpp"

namespace lexdial {

/// Shortest round-trip decimal form of a double.
inline std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw std::runtime_error("format_double failed");
    return std::string(buf, p);
}

inline double parse_double(std::string_view s, std::string_view what) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty())
        throw error("malformed number '" + std::string(s) + "' for " + std::string(what));
    return v;
}

template <typename Int>
Int parse_integer(std::string_view s, std::string_view what) {
    Int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty())
        throw error("malformed integer '" + std::string(s) + "' for " + std::string(what));
    return v;
}

struct count_key {
    cell_id cell;
    std::string concept_id;
    std::string variant_id;

    friend bool operator==(const count_key&, const count_key&) = default;
    friend auto operator<=>(const count_key& a, const count_key& b) {
        if (auto c = a.cell <=> b.cell; c != 0) return c;
        if (auto c = a.concept_id <=> b.concept_id; c != 0) return c;
        return a.variant_id <=> b.variant_id;
    }
};

/// (cell, concept, variant) -> occurrence count. Every stored count is >= 1.
/// Iteration order is (iy, ix, concept, variant).
struct counts_table {
    grid_spec grid;
    std::string lexicon_fingerprint;
    std::map<count_key, std::uint64_t> entries;

    void add(const cell_id& cell, std::string_view concept_id, std::string_view variant_id,
             std::uint64_t n = 1) {
        if (n == 0) return;
        entries[count_key{cell, std::string(concept_id), std::string(variant_id)}] += n;
    }

    std::uint64_t total() const {
        std::uint64_t t = 0;
        for (const auto& [_, n] : entries) t += n;
        return t;
    }

    std::vector<cell_id> cells() const {
        std::vector<cell_id> out;
        for (const auto& [k, _] : entries)
            if (out.empty() || out.back() != k.cell) out.push_back(k.cell);
        return out;
    }

    bool operator==(const counts_table&) const = default;
};

/// Pointwise sum. Both tables must share grid and lexicon.
inline counts_table merge_counts(const counts_table& a, const counts_table& b) {
    if (!(a.grid == b.grid)) throw error("merge_counts: grid mismatch");
    if (a.lexicon_fingerprint != b.lexicon_fingerprint) throw error("merge_counts: lexicon mismatch");
    counts_table out = a;
    for (const auto& [k, n] : b.entries) out.entries[k] += n;
    return out;
}

struct variant_count {
    std::string_view variant_id;
    std::uint64_t count;
};

struct dominance {
    std::string variant_id;
    std::uint64_t count = 0;
    bool tie = false;
};

/// Most frequent variant; ties go to the lexicographically smallest id and
/// are flagged. Returns nullopt when nothing was observed.
inline std::optional<dominance> dominant_variant(std::span<const variant_count> counts) {
    std::optional<dominance> best;
    for (const auto& vc : counts) {
        if (vc.count == 0) continue;
        if (!best || vc.count > best->count) {
            best = dominance{std::string(vc.variant_id), vc.count, false};
        } else if (vc.count == best->count) {
            best->tie = true;
            if (vc.variant_id < best->variant_id) best->variant_id = std::string(vc.variant_id);
        }
    }
    return best;
}

/// Visits every (cell, concept) group of a counts table in table order.
/// fn(cell, concept_id, span<const variant_count>).
template <typename Fn>
void for_each_cell_concept(const counts_table& counts, Fn&& fn) {
    std::vector<variant_count> group;
    const count_key* head = nullptr;
    for (const auto& [k, n] : counts.entries) {
        if (head && (head->cell != k.cell || head->concept_id != k.concept_id)) {
            fn(head->cell, std::string_view(head->concept_id), std::span<const variant_count>(group));
            group.clear();
        }
        head = &k;
        group.push_back({k.variant_id, n});
    }
    if (head) fn(head->cell, std::string_view(head->concept_id), std::span<const variant_count>(group));
}

struct feature_label {
    std::string concept_id;
    std::string variant_id;

    friend bool operator==(const feature_label&, const feature_label&) = default;
    friend auto operator<=>(const feature_label&, const feature_label&) = default;

    std::string str() const { return concept_id + ":" + variant_id; }
};

/// Binary cell x feature matrix. Entry (c, w) is 1 iff w is the dominant
/// variant of its concept in cell c. Rows sorted by (iy, ix), columns by
/// (concept, variant).
struct dominance_matrix {
    grid_spec grid;
    std::string lexicon_fingerprint;
    std::vector<cell_id> cells;
    std::vector<feature_label> features;
    std::vector<std::uint8_t> data; // row-major

    std::size_t rows() const { return cells.size(); }
    std::size_t cols() const { return features.size(); }
    std::uint8_t at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
    std::span<const std::uint8_t> row(std::size_t r) const {
        return {data.data() + r * cols(), cols()};
    }

    /// Column ranges [begin, end) sharing one concept, in column order.
    std::vector<std::tuple<std::string, std::size_t, std::size_t>> concept_blocks() const {
        std::vector<std::tuple<std::string, std::size_t, std::size_t>> blocks;
        for (std::size_t c = 0; c < features.size(); ++c) {
            if (blocks.empty() || std::get<0>(blocks.back()) != features[c].concept_id)
                blocks.emplace_back(features[c].concept_id, c, c + 1);
            else
                std::get<2>(blocks.back()) = c + 1;
        }
        return blocks;
    }

    /// Keeps only the given rows, in the given order.
    dominance_matrix select_rows(std::span<const std::size_t> row_indices) const {
        dominance_matrix out{grid, lexicon_fingerprint, {}, features, {}};
        out.cells.reserve(row_indices.size());
        out.data.reserve(row_indices.size() * cols());
        for (std::size_t r : row_indices) {
            if (r >= rows()) throw error("select_rows: row index out of range");
            out.cells.push_back(cells[r]);
            auto src = row(r);
            out.data.insert(out.data.end(), src.begin(), src.end());
        }
        return out;
    }

    bool operator==(const dominance_matrix&) const = default;
};

inline std::vector<feature_label> lexicon_features(const lexicon& lex) {
    std::vector<feature_label> features;
    for (const auto& c : lex.concepts)
        for (const auto& v : c.variants) features.push_back({c.id, v.id});
    std::sort(features.begin(), features.end());
    return features;
}

inline dominance_matrix build_matrix(const counts_table& counts, const lexicon& lex,
                                     std::size_t min_concepts = 1) {
    if (counts.entries.empty()) throw error("build_matrix: empty counts");
    if (min_concepts < 1) throw error("build_matrix: min_concepts must be >= 1");
    if (!counts.lexicon_fingerprint.empty() && counts.lexicon_fingerprint != lex.fingerprint())
        throw error("build_matrix: counts were built against a different lexicon");

    dominance_matrix m;
    m.grid = counts.grid;
    m.lexicon_fingerprint = lex.fingerprint();
    m.features = lexicon_features(lex);

    std::map<feature_label, std::size_t> column;
    for (std::size_t i = 0; i < m.features.size(); ++i) column.emplace(m.features[i], i);

    std::vector<std::uint8_t> row(m.features.size(), 0);
    std::size_t observed = 0;
    std::optional<cell_id> current;

    auto finish_row = [&] {
        if (current && observed >= min_concepts) {
            m.cells.push_back(*current);
            m.data.insert(m.data.end(), row.begin(), row.end());
        }
        std::fill(row.begin(), row.end(), 0);
        observed = 0;
    };

    for_each_cell_concept(counts, [&](const cell_id& cell, std::string_view concept_id,
                                      std::span<const variant_count> group) {
        if (current != cell) {
            finish_row();
            current = cell;
        }
        for (const auto& vc : group) {
            if (!lex.has_feature(concept_id, vc.variant_id))
                throw error("build_matrix: feature " + std::string(concept_id) + ":" +
                            std::string(vc.variant_id) + " not in lexicon");
        }
        auto dom = dominant_variant(group);
        if (!dom) return;
        ++observed;
        row[column.at(feature_label{std::string(concept_id), dom->variant_id})] = 1;
    });
    finish_row();
    return m;
}

/// Total observations per cell, aligned with `cells`. Cells absent from the
/// table get 0.
inline std::vector<double> observation_totals(const counts_table& counts, std::span<const cell_id> cells) {
    std::map<cell_id, double> totals;
    for (const auto& [k, n] : counts.entries) totals[k.cell] += static_cast<double>(n);
    std::vector<double> out;
    out.reserve(cells.size());
    for (const auto& c : cells) {
        auto it = totals.find(c);
        out.push_back(it == totals.end() ? 0.0 : it->second);
    }
    return out;
}

// ---------------------------------------------------------------------------
// TSV serialization

namespace detail {

inline std::string metadata_line(std::string_view kind, const grid_spec& grid, std::string_view fingerprint) {
    return "# lexdial " + std::string(kind) + " cell_size_arcmin=" + format_double(grid.cell_size_arcmin) +
           " lexicon=" + (fingerprint.empty() ? std::string("-") : std::string(fingerprint)) + "\n";
}

/// Parses `key=value` pairs out of a `# lexdial <kind> ...` comment line.
inline std::map<std::string, std::string> parse_metadata(std::string_view line) {
    std::map<std::string, std::string> kv;
    for (auto tok : split(line, ' ')) {
        auto eq = tok.find('=');
        if (eq == std::string_view::npos) continue;
        kv.emplace(std::string(tok.substr(0, eq)), std::string(tok.substr(eq + 1)));
    }
    return kv;
}

inline void apply_metadata(std::string_view line, grid_spec& grid, std::string& fingerprint) {
    auto kv = parse_metadata(line);
    if (auto it = kv.find("cell_size_arcmin"); it != kv.end())
        grid.cell_size_arcmin = parse_double(it->second, "cell_size_arcmin");
    if (auto it = kv.find("lexicon"); it != kv.end()) fingerprint = it->second == "-" ? "" : it->second;
}

inline bool getline_clean(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

} // namespace detail

inline void write_counts(std::ostream& out, const counts_table& counts) {
    out << detail::metadata_line("counts", counts.grid, counts.lexicon_fingerprint);
    out << "cell\tconcept\tvariant\tcount\n";
    for (const auto& [k, n] : counts.entries)
        out << to_string(k.cell) << '\t' << k.concept_id << '\t' << k.variant_id << '\t' << n << '\n';
}

inline counts_table read_counts(std::istream& in) {
    counts_table counts;
    std::string line;
    bool header = false;
    std::size_t line_no = 0;
    while (detail::getline_clean(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line.front() == '#') {
            detail::apply_metadata(line, counts.grid, counts.lexicon_fingerprint);
            continue;
        }
        if (!header) {
            if (line != "cell\tconcept\tvariant\tcount") throw error("counts: unexpected header '" + line + "'");
            header = true;
            continue;
        }
        auto f = detail::split(line, '\t');
        if (f.size() != 4) throw error("counts: line " + std::to_string(line_no) + ": expected 4 fields");
        auto n = parse_integer<std::uint64_t>(f[3], "count");
        if (n == 0) throw error("counts: line " + std::to_string(line_no) + ": zero count");
        counts.add(parse_cell_id(f[0]), f[1], f[2], n);
    }
    if (!header) throw error("counts: missing header");
    counts.grid.validate();
    return counts;
}

inline void write_matrix(std::ostream& out, const dominance_matrix& m) {
    out << detail::metadata_line("matrix", m.grid, m.lexicon_fingerprint);
    out << "cell";
    for (const auto& f : m.features) out << '\t' << f.str();
    out << '\n';
    std::string line;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        line = to_string(m.cells[r]);
        for (auto v : m.row(r)) {
            line += '\t';
            line += v ? '1' : '0';
        }
        line += '\n';
        out << line;
    }
}

inline dominance_matrix read_matrix(std::istream& in) {
    dominance_matrix m;
    std::string line;
    bool header = false;
    std::size_t line_no = 0;
    while (detail::getline_clean(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line.front() == '#') {
            detail::apply_metadata(line, m.grid, m.lexicon_fingerprint);
            continue;
        }
        auto f = detail::split(line, '\t');
        if (!header) {
            if (f.empty() || f[0] != "cell") throw error("matrix: header must start with 'cell'");
            for (std::size_t i = 1; i < f.size(); ++i) {
                auto colon = f[i].find(':');
                if (colon == std::string_view::npos) throw error("matrix: bad feature label '" + std::string(f[i]) + "'");
                m.features.push_back({std::string(f[i].substr(0, colon)), std::string(f[i].substr(colon + 1))});
            }
            header = true;
            continue;
        }
        if (f.size() != m.features.size() + 1)
            throw error("matrix: line " + std::to_string(line_no) + ": expected " +
                        std::to_string(m.features.size() + 1) + " fields");
        m.cells.push_back(parse_cell_id(f[0]));
        for (std::size_t i = 1; i < f.size(); ++i) {
            if (f[i] == "1") m.data.push_back(1);
            else if (f[i] == "0") m.data.push_back(0);
            else throw error("matrix: line " + std::to_string(line_no) + ": entries must be 0 or 1");
        }
    }
    if (!header) throw error("matrix: missing header");
    m.grid.validate();
    return m;
}

} // namespace lexdial
