// lexdial: command-line front end for the lexical dialect pipeline.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "lexdial/lexdial.hpp"

#ifndef LEXDIAL_DEFAULT_LEXICON
#define LEXDIAL_DEFAULT_LEXICON "data/varilex.tsv"
#endif

namespace fs = std::filesystem;
using namespace lexdial;

namespace {

std::size_t default_threads() {
    if (const char* env = std::getenv("LEXDIAL_THREADS")) {
        try {
            auto n = std::stoul(env);
            if (n > 0) return n;
        } catch (...) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::ifstream open_in(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw error("cannot open " + p.string());
    return in;
}

template <typename Reader>
auto read_with(const fs::path& p, Reader&& reader) {
    auto in = open_in(p);
    try {
        return reader(in);
    } catch (const error& e) {
        throw error(p.string() + ": " + e.what());
    }
}

std::optional<bbox> parse_bbox(const std::string& text) {
    if (text.empty()) return std::nullopt;
    std::vector<double> v;
    for (auto part : lexdial::detail::split(text, ',')) v.push_back(parse_double(lexdial::detail::trim(part), "--bbox"));
    if (v.size() != 4) throw error("--bbox expects lat1,lon1,lat2,lon2");
    return bbox::from_corners(v[0], v[1], v[2], v[3]);
}

struct common_flags {
    std::string lexicon = LEXDIAL_DEFAULT_LEXICON;
    bool no_fold = false;
    bool allow_collisions = false;
    double cell_size = 25.0;
    double variance = 0.95;
    std::size_t kmax = 10;
    double threshold = 0.85;
    std::uint64_t seed = 1;
    std::size_t min_concepts = 1;
    std::string lang;
    std::string bbox_text;
    double scale = 10.0;
    std::size_t threads = default_threads();
    std::size_t n_init = 10;

    lexicon_options lexicon_opts() const {
        lexicon_options o;
        o.normalization.fold_diacritics = !no_fold;
        o.allow_collisions = allow_collisions;
        return o;
    }
    grid_spec grid() const {
        grid_spec g{cell_size};
        g.validate();
        return g;
    }
    ingest_filters filters() const {
        ingest_filters f;
        if (!lang.empty()) f.lang = lang;
        f.box = parse_bbox(bbox_text);
        return f;
    }
    cluster_config clustering() const {
        cluster_config c;
        c.variance_fraction = variance;
        c.k_max = kmax;
        c.threshold = threshold;
        c.seed = seed;
        c.kmeans.n_init = n_init;
        return c;
    }
};

void add_lexicon_flags(CLI::App* app, common_flags& f) {
    app->add_option("--lexicon", f.lexicon, "Lexicon file")->capture_default_str();
    app->add_flag("--no-fold", f.no_fold, "Keep acute accents and diaeresis");
    app->add_flag("--allow-collisions", f.allow_collisions, "Keep the first owner of a shared surface form");
}

void add_cluster_flags(CLI::App* app, common_flags& f) {
    app->add_option("--variance", f.variance, "Variance fraction retained by PCA")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    app->add_option("--kmax", f.kmax, "Largest K evaluated")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--threshold", f.threshold, "f(K) threshold for choosing K")->capture_default_str();
    app->add_option("--seed", f.seed, "Random seed")->capture_default_str();
    app->add_option("--restarts", f.n_init, "K-means restarts per K")->capture_default_str()->check(CLI::PositiveNumber);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"lexdial - lexical dialect maps and clusters from geolocated text"};
    app.require_subcommand(1);
    common_flags f;

    // lexicon validate
    auto* lexicon_cmd = app.add_subcommand("lexicon", "Lexicon utilities");
    lexicon_cmd->require_subcommand(1);
    auto* validate_cmd = lexicon_cmd->add_subcommand("validate", "Load and check a lexicon file");
    std::string validate_path;
    validate_cmd->add_option("path", validate_path, "Lexicon file")->required();
    validate_cmd->add_flag("--no-fold", f.no_fold, "Keep acute accents and diaeresis");
    validate_cmd->add_flag("--allow-collisions", f.allow_collisions, "Keep the first owner of a shared surface form");

    // ingest
    auto* ingest_cmd = app.add_subcommand("ingest", "Count lexicon hits per cell from JSONL records");
    std::vector<std::string> inputs;
    std::string out;
    std::string report_path;
    ingest_cmd->add_option("inputs", inputs, "JSONL inputs (one shard each)")->required();
    add_lexicon_flags(ingest_cmd, f);
    ingest_cmd->add_option("--cell-size", f.cell_size, "Cell size in arc-minutes")->capture_default_str();
    ingest_cmd->add_option("--lang", f.lang, "Keep only records with this lang tag");
    ingest_cmd->add_option("--bbox", f.bbox_text, "Keep only records inside lat1,lon1,lat2,lon2");
    ingest_cmd->add_option("--threads", f.threads, "Worker cap (env LEXDIAL_THREADS)")->capture_default_str();
    ingest_cmd->add_option("--out", out, "counts.tsv output")->required();
    ingest_cmd->add_option("--report", report_path, "Machine-readable ingest report (JSON)");

    // matrix
    auto* matrix_cmd = app.add_subcommand("matrix", "Build the binary dominance matrix");
    std::string counts_path;
    matrix_cmd->add_option("--counts", counts_path, "counts.tsv")->required();
    add_lexicon_flags(matrix_cmd, f);
    matrix_cmd->add_option("--min-concepts", f.min_concepts, "Minimum observed concepts per cell")->capture_default_str();
    matrix_cmd->add_option("--out", out, "matrix.tsv output")->required();

    // cluster
    auto* cluster_cmd = app.add_subcommand("cluster", "PCA + K-means with automatic K");
    std::string matrix_path;
    cluster_cmd->add_option("--matrix", matrix_path, "matrix.tsv")->required();
    cluster_cmd->add_option("--counts", counts_path, "counts.tsv (observation volume for labels)");
    add_cluster_flags(cluster_cmd, f);
    cluster_cmd->add_option("--out", out, "Output directory")->required();

    // subcluster
    auto* sub_cmd = app.add_subcommand("subcluster", "Re-cluster the cells of one cluster");
    std::string clusters_path;
    std::string label = "β";
    sub_cmd->add_option("--matrix", matrix_path, "matrix.tsv")->required();
    sub_cmd->add_option("--clusters", clusters_path, "Parent clusters.tsv")->required();
    sub_cmd->add_option("--label", label, "Parent cluster label")->capture_default_str();
    sub_cmd->add_option("--counts", counts_path, "counts.tsv (observation volume for labels)");
    add_cluster_flags(sub_cmd, f);
    sub_cmd->add_option("--out", out, "Output directory")->required();

    // map concept | map clusters
    auto* map_cmd = app.add_subcommand("map", "Export GeoJSON + SVG maps");
    map_cmd->require_subcommand(1);
    std::string concept_id;
    std::string palette_path;
    double radius = 2.0;
    auto* map_concept = map_cmd->add_subcommand("concept", "Dominant-variant map for one concept");
    map_concept->add_option("--counts", counts_path, "counts.tsv")->required();
    map_concept->add_option("--concept", concept_id, "Concept id, e.g. C182")->required();
    map_concept->add_option("--scale", f.scale, "Circle area per observation")->capture_default_str();
    map_concept->add_option("--palette", palette_path, "key<TAB>color overrides");
    map_concept->add_option("--out", out, "Output path prefix (.geojson/.svg appended)")->required();
    auto* map_clusters = map_cmd->add_subcommand("clusters", "Cluster membership map");
    map_clusters->add_option("--clusters", clusters_path, "clusters.tsv")->required();
    map_clusters->add_option("--radius", radius, "Circle radius")->capture_default_str();
    map_clusters->add_option("--palette", palette_path, "key<TAB>color overrides");
    map_clusters->add_option("--out", out, "Output path prefix (.geojson/.svg appended)")->required();

    // population
    auto* pop_cmd = app.add_subcommand("population", "Population contrast per cluster");
    std::string raster_path;
    pop_cmd->add_option("--clusters", clusters_path, "clusters.tsv")->required();
    pop_cmd->add_option("--raster", raster_path, "ESRI ASCII grid")->required();
    pop_cmd->add_option("--out", out, "pop_stats.tsv output")->required();
    std::string hist_path;
    pop_cmd->add_option("--histogram", hist_path, "Optional log-binned histogram output");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Generate a corpus with planted dialect regions");
    std::string spec_path;
    std::string preset;
    std::size_t records = 50000;
    double noise = 0.1;
    std::size_t n_concepts = 20;
    synth_cmd->add_option("--spec", spec_path, "SynthSpec JSON");
    synth_cmd->add_option("--preset", preset, "two-region | two-level")->check(CLI::IsMember({"two-region", "two-level"}));
    synth_cmd->add_option("--records", records, "Records (presets)")->capture_default_str();
    synth_cmd->add_option("--noise", noise, "Noise rate (presets)")->capture_default_str();
    synth_cmd->add_option("--concepts", n_concepts, "Concepts used (presets)")->capture_default_str();
    synth_cmd->add_option("--seed", f.seed, "Seed (presets; overrides the spec seed when given)");
    synth_cmd->add_option("--cell-size", f.cell_size, "Cell size in arc-minutes")->capture_default_str();
    add_lexicon_flags(synth_cmd, f);
    synth_cmd->add_option("--out", out, "Output directory")->required();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Score clusters against planted truth");
    std::string truth_path;
    std::string level = "region";
    eval_cmd->add_option("--clusters", clusters_path, "clusters.tsv")->required();
    eval_cmd->add_option("--truth", truth_path, "truth.tsv")->required();
    eval_cmd->add_option("--level", level, "region | subregion")->check(CLI::IsMember({"region", "subregion"}))->capture_default_str();
    eval_cmd->add_option("--out", out, "Report output (stdout when omitted)");

    // pipeline
    auto* pipe_cmd = app.add_subcommand("pipeline", "ingest -> matrix -> cluster -> subcluster -> maps");
    pipe_cmd->add_option("inputs", inputs, "JSONL inputs")->required();
    add_lexicon_flags(pipe_cmd, f);
    pipe_cmd->add_option("--cell-size", f.cell_size, "Cell size in arc-minutes")->capture_default_str();
    pipe_cmd->add_option("--lang", f.lang, "Keep only records with this lang tag");
    pipe_cmd->add_option("--bbox", f.bbox_text, "Keep only records inside lat1,lon1,lat2,lon2");
    pipe_cmd->add_option("--min-concepts", f.min_concepts, "Minimum observed concepts per cell")->capture_default_str();
    add_cluster_flags(pipe_cmd, f);
    pipe_cmd->add_option("--label", label, "Cluster to subdivide")->capture_default_str();
    pipe_cmd->add_option("--scale", f.scale, "Circle area per observation")->capture_default_str();
    pipe_cmd->add_option("--raster", raster_path, "ESRI ASCII population grid");
    pipe_cmd->add_option("--palette", palette_path, "key<TAB>color overrides");
    pipe_cmd->add_option("--threads", f.threads, "Worker cap (env LEXDIAL_THREADS)")->capture_default_str();
    pipe_cmd->add_option("--out", out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (validate_cmd->parsed()) {
            auto lex = load_lexicon(validate_path, f.lexicon_opts());
            for (const auto& w : lex.warnings) std::cerr << "warning: " << w << "\n";
            std::cout << lex.concepts.size() << " concepts\n"
                      << lex.raw_feature_count << " raw features\n"
                      << lex.feature_count() << " deduplicated features\n";
        } else if (ingest_cmd->parsed()) {
            auto lex = load_lexicon(f.lexicon, f.lexicon_opts());
            matcher m(std::move(lex));
            std::vector<fs::path> paths(inputs.begin(), inputs.end());
            auto result = ingest_files(paths, m, f.grid(), f.filters(), f.threads);
            write_file(out, render([&](std::ostream& o) { write_counts(o, result.counts); }));
            if (!report_path.empty()) write_file(report_path, result.report.to_json().dump(2) + "\n");
            std::cerr << result.report.summary();
        } else if (matrix_cmd->parsed()) {
            auto lex = load_lexicon(f.lexicon, f.lexicon_opts());
            auto counts = read_with(counts_path, [](std::istream& in) { return read_counts(in); });
            auto m = build_matrix(counts, lex, f.min_concepts);
            write_file(out, render([&](std::ostream& o) { write_matrix(o, m); }));
            std::cerr << m.rows() << " cells x " << m.cols() << " features\n";
        } else if (cluster_cmd->parsed()) {
            auto m = read_with(matrix_path, [](std::istream& in) { return read_matrix(in); });
            std::vector<double> weights;
            if (!counts_path.empty())
                weights = observation_totals(read_with(counts_path, [](std::istream& in) { return read_counts(in); }), m.cells);
            auto config = f.clustering();
            auto proj = pca_fit(m, config.variance_fraction);
            auto model = cluster_cells(m, config, weights);
            write_file(fs::path(out) / "projection.tsv", render([&](std::ostream& o) { write_projection(o, proj); }));
            write_file(fs::path(out) / "clusters.tsv", render([&](std::ostream& o) { write_clusters(o, model); }));
            write_file(fs::path(out) / "fcurve.tsv", render([&](std::ostream& o) { write_fcurve(o, model); }));
            std::cerr << "chosen K = " << model.chosen_k << " (d' = " << model.retained_dim << ")\n";
        } else if (sub_cmd->parsed()) {
            auto m = read_with(matrix_path, [](std::istream& in) { return read_matrix(in); });
            auto parent = read_with(clusters_path, [](std::istream& in) { return read_clusters(in); });
            std::vector<double> weights;
            if (!counts_path.empty())
                weights = observation_totals(read_with(counts_path, [](std::istream& in) { return read_counts(in); }), m.cells);
            auto model = subcluster(parent, label, m, f.clustering(), weights);
            write_file(fs::path(out) / "subclusters.tsv", render([&](std::ostream& o) { write_clusters(o, model); }));
            write_file(fs::path(out) / "subclusters_fcurve.tsv", render([&](std::ostream& o) { write_fcurve(o, model); }));
            std::cerr << "chosen K = " << model.chosen_k << " within " << label << "\n";
        } else if (map_concept->parsed()) {
            auto counts = read_with(counts_path, [](std::istream& in) { return read_counts(in); });
            palette_overrides palette;
            if (!palette_path.empty()) palette = load_palette(palette_path);
            auto doc = concept_map(counts, concept_id, f.scale, palette);
            write_file(out + ".geojson", emit_geojson(doc));
            write_file(out + ".svg", emit_svg(doc));
        } else if (map_clusters->parsed()) {
            auto model = read_with(clusters_path, [](std::istream& in) { return read_clusters(in); });
            palette_overrides palette;
            if (!palette_path.empty()) palette = load_palette(palette_path);
            auto doc = cluster_map(model, radius, palette);
            write_file(out + ".geojson", emit_geojson(doc));
            write_file(out + ".svg", emit_svg(doc));
        } else if (pop_cmd->parsed()) {
            auto model = read_with(clusters_path, [](std::istream& in) { return read_clusters(in); });
            auto stats = cluster_population_stats(model, load_raster(raster_path));
            write_file(out, render([&](std::ostream& o) { write_population_stats(o, stats); }));
            if (!hist_path.empty())
                write_file(hist_path, render([&](std::ostream& o) { write_population_histogram(o, stats); }));
        } else if (synth_cmd->parsed()) {
            if (spec_path.empty() == preset.empty()) throw error("synth: give exactly one of --spec or --preset");
            auto lex = load_lexicon(f.lexicon, f.lexicon_opts());
            synth_spec spec;
            if (!spec_path.empty()) {
                spec = load_synth_spec(spec_path);
                if (synth_cmd->count("--seed")) spec.seed = f.seed;
            } else {
                planted_options o;
                o.n_records = records;
                o.noise_rate = noise;
                o.n_concepts = n_concepts;
                o.seed = f.seed;
                o.subregions = preset == "two-level" ? 3 : 0;
                o.sub_concepts = std::min<std::size_t>(8, n_concepts);
                spec = planted_spec(lex, o);
            }
            auto corpus = gen_corpus(spec, lex, f.grid());
            write_file(fs::path(out) / "corpus.jsonl", corpus.text());
            write_file(fs::path(out) / "truth.tsv", render([&](std::ostream& o) { write_truth(o, corpus.truth); }));
            write_file(fs::path(out) / "spec.json", synth_spec_json(spec));
            std::cerr << corpus.lines.size() << " records over " << corpus.truth.size() << " cells\n";
        } else if (eval_cmd->parsed()) {
            auto model = read_with(clusters_path, [](std::istream& in) { return read_clusters(in); });
            auto truth = read_with(truth_path, [](std::istream& in) { return read_truth(in); });
            auto rep = evaluate_recovery(model, truth, level == "subregion");
            auto text = render([&](std::ostream& o) { write_recovery(o, rep); });
            if (out.empty()) std::cout << text;
            else write_file(out, text);
        } else if (pipe_cmd->parsed()) {
            pipeline_config cfg;
            cfg.lexicon_path = f.lexicon;
            cfg.inputs.assign(inputs.begin(), inputs.end());
            cfg.out_dir = out;
            cfg.lexicon = f.lexicon_opts();
            cfg.grid = f.grid();
            cfg.filters = f.filters();
            cfg.min_concepts = f.min_concepts;
            cfg.clustering = f.clustering();
            cfg.subcluster_label = label;
            cfg.scale = f.scale;
            if (!raster_path.empty()) cfg.raster_path = raster_path;
            if (!palette_path.empty()) cfg.palette_path = palette_path;
            cfg.threads = f.threads;
            auto manifest = run_pipeline(cfg);
            std::cerr << "chosen K = " << manifest["summary"]["chosen_k"].dump()
                      << ", subcluster K = " << manifest["summary"]["subcluster_k"].dump() << "\n";
        }
    } catch (const error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
