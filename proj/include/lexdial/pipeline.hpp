#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <cctype>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexdial/aggregate.hpp"
#include "lexdial/cartography.hpp"
#include "lexdial/cluster.hpp"
#include "lexdial/digest.hpp"
#include "lexdial/error.hpp"
#include "lexdial/ingest.hpp"
#include "lexdial/lexicon.hpp"
#include "lexdial/population.hpp"
#include "lexdial/reduce.hpp"

namespace lexdial {

struct pipeline_config {
    std::filesystem::path lexicon_path;
    std::vector<std::filesystem::path> inputs;
    std::filesystem::path out_dir;
    lexicon_options lexicon;
    grid_spec grid;
    ingest_filters filters;
    std::size_t min_concepts = 1;
    cluster_config clustering;
    std::string subcluster_label = "β";
    double scale = 10.0;
    std::optional<std::filesystem::path> raster_path;
    std::optional<std::filesystem::path> palette_path;
    std::size_t threads = 1;
};

/// Writes `content` to `path`, creating parent directories.
inline void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw error("cannot write " + path.string());
    out << content;
    if (!out) throw error("write failed for " + path.string());
}

template <typename Fn>
std::string render(Fn&& fn) {
    std::ostringstream s;
    fn(s);
    return s.str();
}

/// Ingests every input path as its own shard.
inline ingest_result ingest_files(const std::vector<std::filesystem::path>& inputs, const matcher& m,
                                  const grid_spec& grid, const ingest_filters& filters, std::size_t threads) {
    return ingest_sharded(
        inputs.size(),
        [&](std::size_t i) -> std::unique_ptr<std::istream> {
            auto in = std::make_unique<std::ifstream>(inputs[i], std::ios::binary);
            if (!*in) throw error("cannot open input " + inputs[i].string());
            return in;
        },
        m, grid, filters, threads);
}

/// File name fragment for a concept or label.
inline std::string file_slug(std::string_view s) {
    std::string out;
    for (unsigned char c : s) out += (std::isalnum(c) || c >= 0x80 || c == '-') ? static_cast<char>(c) : '_';
    return out;
}

/// ingest -> matrix -> cluster -> subcluster -> maps [-> population], every
/// stage persisted under out_dir, plus manifest.json with input and artifact
/// digests. Returns the manifest.
inline nlohmann::ordered_json run_pipeline(const pipeline_config& cfg) {
    namespace fs = std::filesystem;
    cfg.grid.validate();
    if (cfg.inputs.empty()) throw error("pipeline: no input files");
    fs::create_directories(cfg.out_dir);

    std::map<std::string, std::string> artifacts; // relative path -> content
    auto emit = [&](const std::string& rel, std::string content) {
        write_file(cfg.out_dir / rel, content);
        artifacts[rel] = sha256_hex(content);
    };

    auto lex = std::make_shared<const lexicon>(load_lexicon(cfg.lexicon_path, cfg.lexicon));
    matcher m(lex);
    auto ingested = ingest_files(cfg.inputs, m, cfg.grid, cfg.filters, cfg.threads);
    emit("counts.tsv", render([&](std::ostream& o) { write_counts(o, ingested.counts); }));
    emit("ingest_report.json", ingested.report.to_json().dump(2) + "\n");

    auto matrix = build_matrix(ingested.counts, *lex, cfg.min_concepts);
    emit("matrix.tsv", render([&](std::ostream& o) { write_matrix(o, matrix); }));

    auto proj = pca_fit(matrix, cfg.clustering.variance_fraction);
    emit("projection.tsv", render([&](std::ostream& o) { write_projection(o, proj); }));

    const auto weights = observation_totals(ingested.counts, matrix.cells);
    auto model = cluster_cells(matrix, cfg.clustering, weights);
    emit("clusters.tsv", render([&](std::ostream& o) { write_clusters(o, model); }));
    emit("fcurve.tsv", render([&](std::ostream& o) { write_fcurve(o, model); }));

    palette_overrides palette;
    if (cfg.palette_path) palette = load_palette(*cfg.palette_path);

    nlohmann::ordered_json notes = nlohmann::ordered_json::array();
    std::optional<cluster_model> sub;
    if (model.index_of_label(cfg.subcluster_label)) {
        try {
            sub = subcluster(model, cfg.subcluster_label, matrix, cfg.clustering, weights);
        } catch (const error& e) {
            notes.push_back(std::string("subcluster skipped: ") + e.what());
        }
    } else {
        notes.push_back("subcluster skipped: no cluster labelled " + cfg.subcluster_label);
    }
    if (sub) {
        emit("subclusters.tsv", render([&](std::ostream& o) { write_clusters(o, *sub); }));
        emit("subclusters_fcurve.tsv", render([&](std::ostream& o) { write_fcurve(o, *sub); }));
    }

    {
        auto doc = cluster_map(model, 2.0, palette);
        emit("maps/clusters.geojson", emit_geojson(doc));
        emit("maps/clusters.svg", emit_svg(doc));
    }
    if (sub) {
        auto doc = cluster_map(*sub, 2.0, palette);
        emit("maps/subclusters.geojson", emit_geojson(doc));
        emit("maps/subclusters.svg", emit_svg(doc));
    }
    std::set<std::string> concepts;
    for (const auto& [k, _] : ingested.counts.entries) concepts.insert(k.concept_id);
    for (const auto& cid : concepts) {
        auto doc = concept_map(ingested.counts, cid, cfg.scale, palette);
        emit("maps/concept_" + file_slug(cid) + ".geojson", emit_geojson(doc));
        emit("maps/concept_" + file_slug(cid) + ".svg", emit_svg(doc));
    }

    if (cfg.raster_path) {
        auto pop = load_raster(*cfg.raster_path);
        auto stats = cluster_population_stats(model, pop);
        emit("pop_stats.tsv", render([&](std::ostream& o) { write_population_stats(o, stats); }));
        emit("pop_hist.tsv", render([&](std::ostream& o) { write_population_histogram(o, stats); }));
    }

    nlohmann::ordered_json manifest;
    nlohmann::ordered_json config;
    config["lexicon"] = cfg.lexicon_path.string();
    config["fold_diacritics"] = cfg.lexicon.normalization.fold_diacritics;
    config["cell_size_arcmin"] = cfg.grid.cell_size_arcmin;
    config["lang"] = cfg.filters.lang ? nlohmann::ordered_json(*cfg.filters.lang) : nlohmann::ordered_json(nullptr);
    if (cfg.filters.box) {
        const auto& b = *cfg.filters.box;
        config["bbox"] = {b.lat_min, b.lon_min, b.lat_max, b.lon_max};
    } else {
        config["bbox"] = nullptr;
    }
    config["min_concepts"] = cfg.min_concepts;
    config["variance_fraction"] = cfg.clustering.variance_fraction;
    config["kmax"] = cfg.clustering.k_max;
    config["threshold"] = cfg.clustering.threshold;
    config["n_init"] = cfg.clustering.kmeans.n_init;
    config["max_iter"] = cfg.clustering.kmeans.max_iter;
    config["subcluster_label"] = cfg.subcluster_label;
    config["scale"] = cfg.scale;
    config["raster"] = cfg.raster_path ? nlohmann::ordered_json(cfg.raster_path->string()) : nlohmann::ordered_json(nullptr);
    manifest["config"] = config;
    manifest["seed"] = cfg.clustering.seed;

    nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
    inputs.push_back({{"path", cfg.lexicon_path.string()}, {"sha256", sha256_file(cfg.lexicon_path)}});
    for (const auto& p : cfg.inputs) inputs.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
    if (cfg.raster_path) inputs.push_back({{"path", cfg.raster_path->string()}, {"sha256", sha256_file(*cfg.raster_path)}});
    manifest["inputs"] = inputs;

    nlohmann::ordered_json summary;
    summary["records_kept"] = ingested.report.records_kept;
    summary["hits"] = ingested.report.hits;
    summary["cells"] = matrix.rows();
    summary["features"] = matrix.cols();
    summary["retained_dim"] = model.retained_dim;
    summary["variance_retained"] = model.variance_retained;
    summary["chosen_k"] = model.chosen_k;
    summary["subcluster_k"] = sub ? nlohmann::ordered_json(sub->chosen_k) : nlohmann::ordered_json(nullptr);
    manifest["summary"] = summary;
    manifest["notes"] = notes;

    nlohmann::ordered_json digests = nlohmann::ordered_json::object();
    for (const auto& [rel, hex] : artifacts) digests[rel] = hex;
    manifest["artifacts"] = digests;

    write_file(cfg.out_dir / "manifest.json", manifest.dump(2) + "\n");
    return manifest;
}

} // namespace lexdial
