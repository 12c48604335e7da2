#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <istream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <variant>
#include <vector>

#include <json.hpp>

#include "lexdial/aggregate.hpp"
#include "lexdial/error.hpp"
#include "lexdial/geogrid.hpp"
#include "lexdial/lexicon.hpp"

namespace lexdial {

struct record {
    std::string text;
    double lat = 0;
    double lon = 0;
    std::optional<std::string> lang;
    std::optional<std::string> timestamp;
};

enum class skip_reason : std::size_t {
    malformed,
    missing_text,
    missing_coordinates,
    out_of_range,
    wrong_language,
    outside_bbox,
};
inline constexpr std::size_t skip_reason_count = 6;

inline std::string_view to_string(skip_reason r) {
    constexpr std::array<std::string_view, skip_reason_count> names{
        "malformed", "missing_text", "missing_coordinates", "out_of_range", "wrong_language", "outside_bbox"};
    return names[static_cast<std::size_t>(r)];
}

/// Inclusive latitude/longitude box. Built from any two opposite corners.
struct bbox {
    double lat_min, lon_min, lat_max, lon_max;

    static bbox from_corners(double lat1, double lon1, double lat2, double lon2) {
        if (!valid_coordinates(lat1, lon1) || !valid_coordinates(lat2, lon2))
            throw error("bounding box corner out of range");
        return {std::min(lat1, lat2), std::min(lon1, lon2), std::max(lat1, lat2), std::max(lon1, lon2)};
    }

    bool contains(double lat, double lon) const {
        return lat >= lat_min && lat <= lat_max && lon >= lon_min && lon <= lon_max;
    }
};

struct ingest_filters {
    std::optional<std::string> lang;
    std::optional<bbox> box;
};

using parse_result = std::variant<record, skip_reason>;

/// Parses one JSONL line. Required: non-empty string `text`, numeric `lat`
/// and `lon`. Optional: `lang`, `ts`.
inline parse_result parse_record(std::string_view line, const ingest_filters& filters = {}) {
    using nlohmann::json;
    json doc = json::parse(line.begin(), line.end(), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) return skip_reason::malformed;

    auto text = doc.find("text");
    if (text == doc.end() || !text->is_string() || text->get_ref<const std::string&>().empty())
        return skip_reason::missing_text;

    auto lat = doc.find("lat");
    auto lon = doc.find("lon");
    if (lat == doc.end() || lon == doc.end() || lat->is_null() || lon->is_null())
        return skip_reason::missing_coordinates;
    if (!lat->is_number() || !lon->is_number()) return skip_reason::malformed;

    record r;
    r.lat = lat->get<double>();
    r.lon = lon->get<double>();
    if (!valid_coordinates(r.lat, r.lon)) return skip_reason::out_of_range;

    if (auto lang = doc.find("lang"); lang != doc.end() && lang->is_string()) r.lang = lang->get<std::string>();
    if (auto ts = doc.find("ts"); ts != doc.end() && ts->is_string()) r.timestamp = ts->get<std::string>();

    if (filters.lang && r.lang != filters.lang) return skip_reason::wrong_language;
    if (filters.box && !filters.box->contains(r.lat, r.lon)) return skip_reason::outside_bbox;

    r.text = std::move(text->get_ref<std::string&>());
    return r;
}

struct ingest_report {
    std::uint64_t lines_read = 0;
    std::uint64_t records_kept = 0;
    std::uint64_t hits = 0;
    std::array<std::uint64_t, skip_reason_count> skips{};

    std::uint64_t total_skips() const {
        std::uint64_t t = 0;
        for (auto s : skips) t += s;
        return t;
    }

    ingest_report& operator+=(const ingest_report& o) {
        lines_read += o.lines_read;
        records_kept += o.records_kept;
        hits += o.hits;
        for (std::size_t i = 0; i < skip_reason_count; ++i) skips[i] += o.skips[i];
        return *this;
    }

    bool operator==(const ingest_report&) const = default;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["lines_read"] = lines_read;
        j["records_kept"] = records_kept;
        j["hits"] = hits;
        nlohmann::ordered_json s = nlohmann::ordered_json::object();
        for (std::size_t i = 0; i < skip_reason_count; ++i) s[std::string(to_string(static_cast<skip_reason>(i)))] = skips[i];
        j["skips"] = s;
        return j;
    }

    std::string summary() const {
        std::string out = "lines read: " + std::to_string(lines_read) + "\nrecords kept: " +
                          std::to_string(records_kept) + "\nhits: " + std::to_string(hits) + "\nskipped: " +
                          std::to_string(total_skips()) + "\n";
        for (std::size_t i = 0; i < skip_reason_count; ++i) {
            if (skips[i])
                out += "  " + std::string(to_string(static_cast<skip_reason>(i))) + ": " + std::to_string(skips[i]) + "\n";
        }
        return out;
    }
};

struct ingest_result {
    counts_table counts;
    ingest_report report;
};

namespace detail {

struct hit_key {
    std::uint64_t cell;
    std::uint32_t concept_index;
    std::uint32_t variant_index;
    bool operator==(const hit_key&) const = default;
};

struct hit_key_hash {
    std::size_t operator()(const hit_key& k) const noexcept {
        std::uint64_t h = k.cell * 0x9E3779B97F4A7C15ull;
        h ^= (static_cast<std::uint64_t>(k.concept_index) << 32 | k.variant_index) + 0x632BE59BD9B4E019ull + (h << 6) + (h >> 2);
        return static_cast<std::size_t>(h);
    }
};

} // namespace detail

/// Reads JSONL records, matches each text and counts one occurrence per hit
/// in the record's cell.
inline ingest_result ingest_stream(std::istream& in, const matcher& m, const grid_spec& grid,
                                   const ingest_filters& filters = {}) {
    grid.validate();
    if (in.bad()) throw error("ingest: unreadable input stream");

    ingest_report report;
    std::unordered_map<detail::hit_key, std::uint64_t, detail::hit_key_hash> tally;

    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ++report.lines_read;
        auto parsed = parse_record(line, filters);
        if (auto* reason = std::get_if<skip_reason>(&parsed)) {
            ++report.skips[static_cast<std::size_t>(*reason)];
            continue;
        }
        auto& rec = std::get<record>(parsed);
        ++report.records_kept;
        const std::uint64_t cell = cell_of(rec.lat, rec.lon, grid).packed();
        for (const auto& h : m.match_text(rec.text)) {
            ++tally[{cell, h.concept_index, h.variant_index}];
            ++report.hits;
        }
    }
    if (in.bad()) throw error("ingest: read error");

    ingest_result result;
    result.report = report;
    result.counts.grid = grid;
    const lexicon& lex = m.lexicon_ref();
    result.counts.lexicon_fingerprint = lex.fingerprint();
    for (const auto& [k, n] : tally) {
        const auto& c = lex.concepts[k.concept_index];
        result.counts.add(cell_id::unpack(k.cell), c.id, c.variants[k.variant_index].id, n);
    }
    return result;
}

/// Combines shard results; the counts merge is associative and commutative.
inline ingest_result merge_results(const ingest_result& a, const ingest_result& b) {
    ingest_result out{merge_counts(a.counts, b.counts), a.report};
    out.report += b.report;
    return out;
}

/// Ingests `shards` independent inputs on up to `threads` workers. Each shard
/// owns a private table; the final merge is single-threaded and in shard
/// order. `open(i)` returns the i-th input stream.
inline ingest_result ingest_sharded(std::size_t shards,
                                    const std::function<std::unique_ptr<std::istream>(std::size_t)>& open,
                                    const matcher& m, const grid_spec& grid, const ingest_filters& filters = {},
                                    std::size_t threads = 1) {
    if (shards == 0) throw error("ingest: no inputs");
    threads = std::clamp<std::size_t>(threads, 1, shards);

    std::vector<std::optional<ingest_result>> partial(shards);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < shards;) {
            try {
                auto stream = open(i);
                if (!stream || !*stream) throw error("ingest: cannot open input shard " + std::to_string(i));
                partial[i] = ingest_stream(*stream, m, grid, filters);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };

    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    ingest_result total = std::move(*partial[0]);
    for (std::size_t i = 1; i < shards; ++i) total = merge_results(total, *partial[i]);
    return total;
}

} // namespace lexdial
