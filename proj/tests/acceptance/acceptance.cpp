// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance                 all criteria
//   acceptance --criterion 4   just one
//
// Exit status is 0 only when every selected criterion passes.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "lexdial/lexdial.hpp"

namespace fs = std::filesystem;
using namespace lexdial;
using clock_type = std::chrono::steady_clock;

namespace {

const std::string lexicon_path = std::string(LEXDIAL_DATA_DIR) + "/varilex.tsv";

struct outcome {
    bool pass;
    std::string detail;
};

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s.precision(precision);
    s << v;
    return s.str();
}

const lexicon& bundled() {
    static const lexicon lex = load_lexicon(lexicon_path);
    return lex;
}

struct scratch_dir {
    fs::path path;
    scratch_dir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("lexdial_acceptance_" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~scratch_dir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

// Exhaustive K-means optimum over all partitions into exactly k groups.
double exhaustive_distortion(const Eigen::MatrixXd& x, std::size_t k) {
    const auto n = static_cast<std::size_t>(x.rows());
    std::vector<std::size_t> label(n, 0);
    double best = std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t used) {
        if (i == n) {
            if (used != k) return;
            double s = 0;
            for (std::size_t g = 0; g < k; ++g) {
                Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(x.cols());
                double count = 0;
                for (std::size_t j = 0; j < n; ++j)
                    if (label[j] == g) mean += x.row(static_cast<Eigen::Index>(j)), count += 1;
                mean /= count;
                for (std::size_t j = 0; j < n; ++j)
                    if (label[j] == g) s += (x.row(static_cast<Eigen::Index>(j)) - mean).squaredNorm();
            }
            best = std::min(best, s);
            return;
        }
        for (std::size_t g = 0; g < std::min(used + 1, k); ++g) {
            label[i] = g;
            rec(i + 1, std::max(used, g + 1));
        }
    };
    rec(0, 0);
    return best;
}

// Runs the file-based pipeline on a planted corpus and scores it.
struct planted_run {
    std::size_t chosen_k = 0;
    std::optional<std::size_t> sub_k;
    double ari = 0;
    std::optional<double> sub_ari;
    double seconds = 0;
};

planted_run run_planted(const planted_options& o, const fs::path& dir) {
    const auto t0 = clock_type::now();
    auto spec = planted_spec(bundled(), o);
    auto corpus = gen_corpus(spec, bundled(), grid_spec{});
    write_file(dir / "corpus.jsonl", corpus.text());

    pipeline_config cfg;
    cfg.lexicon_path = lexicon_path;
    cfg.inputs = {dir / "corpus.jsonl"};
    cfg.out_dir = dir / "out";
    cfg.subcluster_label = "β";
    run_pipeline(cfg);

    planted_run r;
    std::ifstream clusters(cfg.out_dir / "clusters.tsv");
    auto model = read_clusters(clusters);
    r.chosen_k = model.chosen_k;
    r.ari = evaluate_recovery(model, corpus.truth).ari;
    if (fs::exists(cfg.out_dir / "subclusters.tsv")) {
        std::ifstream sub(cfg.out_dir / "subclusters.tsv");
        auto sub_model = read_clusters(sub);
        r.sub_k = sub_model.chosen_k;
        r.sub_ari = evaluate_recovery(sub_model, corpus.truth, true).ari;
    }
    r.seconds = seconds_since(t0);
    return r;
}

Eigen::MatrixXd blobs(std::mt19937_64& gen, const std::vector<Eigen::Vector2d>& centres, std::size_t per, double sd) {
    std::normal_distribution<double> n(0, sd);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(centres.size() * per), 2);
    Eigen::Index r = 0;
    for (const auto& c : centres)
        for (std::size_t i = 0; i < per; ++i, ++r) x.row(r) << c.x() + n(gen), c.y() + n(gen);
    return x;
}

// ---------------------------------------------------------------------------

outcome criterion_1() {
    const auto t0 = clock_type::now();
    auto lex = load_lexicon(lexicon_path);
    const double secs = seconds_since(t0);
    const bool concepts_ok = lex.concepts.size() == 46;
    const bool raw_ok = lex.raw_feature_count >= 325 && lex.raw_feature_count <= 335;
    return {concepts_ok && raw_ok && secs < 1.0,
            std::to_string(lex.concepts.size()) + " concepts (want 46), " + std::to_string(lex.raw_feature_count) +
                " raw variant entries (want 325..335), " + std::to_string(lex.feature_count()) +
                " after dedup, load " + fmt(secs, 3) + " s (want < 1)"};
}

outcome criterion_2() {
    scratch_dir tmp;
    int good = 0;
    double worst = 0, total = 0;
    std::string ks;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        planted_options o;
        o.n_concepts = 20;
        o.n_records = 50000;
        o.noise_rate = 0.1;
        o.seed = seed;
        auto r = run_planted(o, tmp.path / std::to_string(seed));
        good += r.chosen_k == 2 && r.ari >= 0.9;
        worst = std::max(worst, r.seconds);
        total += r.seconds;
        ks += (ks.empty() ? "" : ",") + std::to_string(r.chosen_k);
    }
    return {good >= 9 && worst < 60.0, std::to_string(good) + "/10 seeds with K=2 and ARI >= 0.9 (want >= 9), K per seed [" +
                                           ks + "], slowest run " + fmt(worst, 3) + " s (want < 60), all runs " +
                                           fmt(total, 3) + " s"};
}

outcome criterion_3() {
    scratch_dir tmp;
    int good = 0;
    std::string aris;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        planted_options o;
        o.subregions = 3;
        o.seed = seed;
        auto r = run_planted(o, tmp.path / std::to_string(seed));
        const double ari = r.sub_ari.value_or(0.0);
        good += r.chosen_k == 2 && r.sub_k == 3u && ari >= 0.8;
        aris += (aris.empty() ? "" : ",") + fmt(ari, 3);
    }
    return {good >= 8, std::to_string(good) + "/10 seeds where β splits into 3 with ARI >= 0.8 (want >= 8), ARI [" + aris + "]"};
}

outcome criterion_4() {
    int three = 0, one = 0;
    std::string f3s;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 gen(seed);
        auto x = blobs(gen, {{0, 0}, {10, 0}, {5, 10}}, 100, 0.5);
        auto curve = pham_f_curve(x, 10, seed);
        three += select_k(curve) == 3 && curve.f_of(3) < 0.85;
        f3s += (f3s.empty() ? "" : ",") + fmt(curve.f_of(3), 3);
        auto single = blobs(gen, {{0, 0}}, 300, 0.5);
        one += select_k(pham_f_curve(single, 10, seed)) == 1;
    }
    return {three >= 9 && one >= 9, "three blobs -> K=3 in " + std::to_string(three) + "/10 (f(3) [" + f3s +
                                        "]), single blob -> K=1 in " + std::to_string(one) + "/10 (want >= 9 each)"};
}

outcome criterion_5() {
    int good = 0;
    double worst_rel = 0, min_share = 1;
    for (unsigned seed = 0; seed < 10; ++seed) {
        std::mt19937_64 gen(seed);
        std::bernoulli_distribution coin(0.3);
        Eigen::MatrixXd m(200, 50);
        for (int r = 0; r < 200; ++r)
            for (int c = 0; c < 50; ++c) m(r, c) = coin(gen) ? 1.0 : 0.0;
        auto p = pca_fit(m, 0.95);
        const bool share_ok = p.retained_share() >= 0.95;
        const bool minimal = p.retained_dim == 0 || p.cumulative_share(p.retained_dim - 1) < 0.95;
        auto x = project(p, m);
        const double residual = (m - reconstruct(p, x)).squaredNorm();
        double discarded = 0;
        for (auto i = static_cast<Eigen::Index>(p.retained_dim); i < p.eigenvalues.size(); ++i) discarded += p.eigenvalues(i);
        discarded *= 199;
        const double rel = std::abs(residual - discarded) / std::max(discarded, 1e-300);
        worst_rel = std::max(worst_rel, rel);
        min_share = std::min(min_share, p.retained_share());
        good += share_ok && minimal && rel <= 1e-8;
    }
    return {good == 10, std::to_string(good) + "/10 matrices satisfy the contract, min retained share " + fmt(min_share, 5) +
                            ", worst residual relative error " + fmt(worst_rel, 3) + " (want <= 1e-8)"};
}

outcome criterion_6() {
    std::size_t instances = 0, matched = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 gen(seed);
        std::uniform_real_distribution<double> u(-5, 5);
        for (int n = 1; n <= 8; ++n) {
            Eigen::MatrixXd x(n, 2);
            for (int i = 0; i < n; ++i) x.row(i) << u(gen), u(gen);
            for (std::size_t k = 1; k <= std::min<std::size_t>(3, static_cast<std::size_t>(n)); ++k) {
                ++instances;
                const double got = kmeans(x, k, seed).distortion;
                const double best = exhaustive_distortion(x, k);
                matched += std::abs(got - best) <= 1e-9 * std::max(1.0, best);
            }
        }
    }
    return {matched == instances,
            std::to_string(matched) + "/" + std::to_string(instances) + " instances reach the exhaustive optimum"};
}

outcome criterion_7() {
    std::size_t matrices = 0, good = 0;
    std::mt19937_64 gen(7);
    const auto features = lexicon_features(bundled());
    auto check = [&](const counts_table& counts) {
        ++matrices;
        auto m = build_matrix(counts, bundled(), 1);
        bool ok = m.rows() == counts.cells().size();
        for (std::size_t r = 0; r < m.rows() && ok; ++r)
            for (const auto& [cid, b, e] : m.concept_blocks()) {
                unsigned s = 0;
                for (std::size_t c = b; c < e; ++c) s += m.at(r, c);
                ok = ok && s <= 1;
            }
        std::ostringstream first;
        write_matrix(first, m);
        std::istringstream in(first.str());
        auto back = read_matrix(in);
        std::ostringstream second;
        write_matrix(second, back);
        ok = ok && back == m && first.str() == second.str();
        good += ok;
    };
    for (int trial = 0; trial < 20; ++trial) {
        counts_table t;
        t.lexicon_fingerprint = bundled().fingerprint();
        const std::size_t entries = 50 + gen() % 2000;
        for (std::size_t i = 0; i < entries; ++i) {
            const auto& f = features[gen() % features.size()];
            t.add({static_cast<int>(gen() % 60), static_cast<int>(gen() % 40)}, f.concept_id, f.variant_id, 1 + gen() % 4);
        }
        check(t);
    }
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        planted_options o;
        o.n_records = 20000;
        o.seed = seed;
        o.subregions = seed == 3 ? 3 : 0;
        auto corpus = gen_corpus(planted_spec(bundled(), o), bundled(), grid_spec{});
        std::istringstream in(corpus.text());
        check(ingest_stream(in, matcher(bundled()), grid_spec{}).counts);
    }
    return {good == matrices, std::to_string(good) + "/" + std::to_string(matrices) +
                                  " matrices satisfy block sums, row count and byte-exact round trip"};
}

outcome criterion_8() {
    planted_options o;
    o.n_records = 50000;
    o.subregions = 3;
    auto corpus = gen_corpus(planted_spec(bundled(), o), bundled(), grid_spec{});
    matcher m(bundled());
    const std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::string> bytes;
    for (std::size_t shards : {1u, 2u, 8u}) {
        std::vector<std::string> parts(shards);
        const std::size_t per = (corpus.lines.size() + shards - 1) / shards;
        for (std::size_t i = 0; i < corpus.lines.size(); ++i) parts[i / per] += corpus.lines[i] + "\n";
        auto r = ingest_sharded(
            shards, [&](std::size_t i) { return std::make_unique<std::istringstream>(parts[i]); }, m, grid_spec{}, {},
            threads);
        bytes.push_back(render([&](std::ostream& out) { write_counts(out, r.counts); }));
    }
    const bool same = bytes[0] == bytes[1] && bytes[0] == bytes[2];
    return {same, std::string("counts.tsv from 1, 2 and 8 shards ") + (same ? "identical" : "differ") + " (" +
                      sha256_hex(bytes[0]).substr(0, 16) + ")"};
}

outcome criterion_9() {
    scratch_dir tmp;
    planted_options o;
    o.subregions = 3;
    auto corpus = gen_corpus(planted_spec(bundled(), o), bundled(), grid_spec{});
    write_file(tmp.path / "corpus.jsonl", corpus.text());
    std::vector<std::string> artifacts;
    for (const char* name : {"run1", "run2"}) {
        pipeline_config cfg;
        cfg.lexicon_path = lexicon_path;
        cfg.inputs = {tmp.path / "corpus.jsonl"};
        cfg.out_dir = tmp.path / name;
        cfg.threads = std::max(1u, std::thread::hardware_concurrency());
        artifacts.push_back(run_pipeline(cfg)["artifacts"].dump());
    }
    const bool same = artifacts[0] == artifacts[1];
    return {same, std::string("manifest artifact digests ") + (same ? "identical" : "differ") + " across two runs"};
}

outcome criterion_10() {
    planted_options o;
    o.n_records = 200000;
    o.n_concepts = 30;
    o.subregions = 3;
    auto corpus = gen_corpus(planted_spec(bundled(), o), bundled(), grid_spec{});
    matcher m(bundled());
    const std::string text = corpus.text();

    auto best_of = [](int reps, auto&& fn) {
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < reps; ++i) {
            const auto t0 = clock_type::now();
            fn();
            best = std::min(best, seconds_since(t0));
        }
        return best;
    };
    const double single = best_of(3, [&] {
        std::istringstream in(text);
        ingest_stream(in, m, grid_spec{});
    });
    const double rate = static_cast<double>(corpus.lines.size()) / single;

    std::vector<std::string> parts(4);
    for (std::size_t i = 0; i < corpus.lines.size(); ++i) parts[i * 4 / corpus.lines.size()] += corpus.lines[i] + "\n";
    const double sharded = best_of(3, [&] {
        ingest_sharded(4, [&](std::size_t i) { return std::make_unique<std::istringstream>(parts[i]); }, m, grid_spec{},
                       {}, 4);
    });
    const double speedup = single / sharded;
    const unsigned cores = std::thread::hardware_concurrency();
    return {rate >= 20000 && speedup >= 3.0,
            fmt(rate, 6) + " records/s single-threaded (want >= 20000) against " + std::to_string(bundled().feature_count()) +
                " features, 4-shard speedup " + fmt(speedup, 3) + "x (want >= 3) on " + std::to_string(cores) +
                " hardware thread(s)"};
}

outcome criterion_11() {
    planted_options o;
    o.n_records = 20000;
    auto corpus = gen_corpus(planted_spec(bundled(), o), bundled(), grid_spec{});
    std::istringstream in(corpus.text());
    auto counts = ingest_stream(in, matcher(bundled()), grid_spec{}).counts;
    counts.add({10, 10}, "C182", "gripa", 9);
    counts.add({11, 10}, "C182", "gripa", 1);

    std::set<std::string> concepts;
    for (const auto& [k, n] : counts.entries) concepts.insert(k.concept_id);
    std::size_t recovered = 0, expected = 0;
    bool exact = true;
    for (const auto& cid : concepts) {
        auto doc = concept_map(counts, cid, 10.0);
        // Reference triples straight from the counts table.
        std::map<std::string, std::pair<std::string, std::uint64_t>> want;
        for_each_cell_concept(counts, [&](const cell_id& cell, std::string_view c, std::span<const variant_count> g) {
            if (c != cid) return;
            std::uint64_t total = 0;
            for (const auto& vc : g) total += vc.count;
            want[to_string(cell)] = {std::string(dominant_variant(g)->variant_id), total};
        });
        expected += want.size();
        auto j = nlohmann::json::parse(emit_geojson(doc));
        for (const auto& f : j["features"]) {
            const auto& p = f["properties"];
            auto it = want.find(p["cell"].get<std::string>());
            if (it != want.end() && it->second.first == p["variant"] && it->second.second == p["count"].get<std::uint64_t>())
                ++recovered;
        }
        for (const auto& a : doc.marks)
            for (const auto& b : doc.marks) {
                const double area_ratio = (a.radius * a.radius) / (b.radius * b.radius);
                const double count_ratio = static_cast<double>(a.count) / static_cast<double>(b.count);
                exact = exact && std::abs(area_ratio - count_ratio) <= 1e-12 * count_ratio;
            }
    }
    const double r9 = area_radius(10.0, 9), r1 = area_radius(10.0, 1);
    const bool ratio = std::abs(r9 / r1 - 3.0) <= 1e-15 * 3.0;
    return {recovered == expected && exact && ratio,
            std::to_string(recovered) + "/" + std::to_string(expected) + " (cell, variant, count) triples recovered over " +
                std::to_string(concepts.size()) + " concept maps, area ratios " + (exact ? "exact" : "inexact") +
                ", 9:1 counts -> radius ratio " + fmt(r9 / r1, 17)};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    int only = 0;
    app.add_option("--criterion", only, "Run a single criterion (1-11)")->check(CLI::Range(1, 11));
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::function<outcome()>> criteria{criterion_1, criterion_2, criterion_3, criterion_4,
                                                         criterion_5, criterion_6, criterion_7, criterion_8,
                                                         criterion_9, criterion_10, criterion_11};
    bool all = true;
    for (int i = 1; i <= static_cast<int>(criteria.size()); ++i) {
        if (only && i != only) continue;
        outcome o;
        const auto t0 = clock_type::now();
        try {
            o = criteria[static_cast<std::size_t>(i - 1)]();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::cout << "criterion " << i << ": " << (o.pass ? "PASS" : "FAIL") << " : " << o.detail << " ["
                  << fmt(seconds_since(t0), 3) << " s]" << std::endl;
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
