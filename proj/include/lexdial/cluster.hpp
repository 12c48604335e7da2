#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lexdial/aggregate.hpp"
#include "lexdial/error.hpp"
#include "lexdial/reduce.hpp"

namespace lexdial {

// ---------------------------------------------------------------------------
// Seeded randomness. Values depend only on the seed, never on the platform's
// distribution implementations.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Child seed for a numbered sub-stream.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x5851F42D4C957F2Dull));
}

class rng {
public:
    explicit rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform in [0, n).
    std::size_t index(std::size_t n) {
        return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n)));
    }

    /// Standard normal (Box-Muller).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// K-means

struct kmeans_options {
    std::size_t n_init = 10;
    std::size_t max_iter = 300;
};

struct kmeans_result {
    std::size_t k = 0;
    Eigen::MatrixXd centroids; // k x d
    std::vector<std::size_t> assignments;
    double distortion = 0; // S_K
    std::uint64_t seed = 0;
    std::size_t iterations = 0;
    std::size_t best_restart = 0;
    /// S after each centroid update of the winning restart.
    std::vector<double> distortion_history;
};

namespace detail {

inline double squared_distance(const Eigen::MatrixXd& x, Eigen::Index row, const Eigen::MatrixXd& c, Eigen::Index crow) {
    return (x.row(row) - c.row(crow)).squaredNorm();
}

inline double total_distortion(const Eigen::MatrixXd& x, const Eigen::MatrixXd& c,
                               const std::vector<std::size_t>& assign) {
    double s = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        s += squared_distance(x, i, c, static_cast<Eigen::Index>(assign[static_cast<std::size_t>(i)]));
    return s;
}

/// Greedy D^2-weighted seeding: each step draws 2 + floor(ln k) candidates
/// by D^2 weight and keeps the one giving the lowest potential.
inline Eigen::MatrixXd seed_centroids(const Eigen::MatrixXd& x, std::size_t k, rng& gen) {
    const auto n = static_cast<std::size_t>(x.rows());
    Eigen::MatrixXd c(static_cast<Eigen::Index>(k), x.cols());
    std::size_t first = gen.index(n);
    c.row(0) = x.row(static_cast<Eigen::Index>(first));

    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(x, static_cast<Eigen::Index>(i), c, 0);

    const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));
    std::vector<double> trial_d2(n), best_d2(n);
    for (std::size_t j = 1; j < k; ++j) {
        double total = 0;
        for (double v : d2) total += v;
        std::size_t pick = 0;
        if (total <= 0) {
            pick = gen.index(n);
            best_d2 = d2;
        } else {
            double best_potential = std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < trials; ++t) {
                const double target = gen.uniform() * total;
                double acc = 0;
                std::size_t cand = n - 1;
                for (std::size_t i = 0; i < n; ++i) {
                    acc += d2[i];
                    if (acc > target && d2[i] > 0) {
                        cand = i;
                        break;
                    }
                }
                double potential = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    trial_d2[i] = std::min(d2[i], (x.row(static_cast<Eigen::Index>(i)) - x.row(static_cast<Eigen::Index>(cand))).squaredNorm());
                    potential += trial_d2[i];
                }
                if (potential < best_potential) {
                    best_potential = potential;
                    pick = cand;
                    best_d2 = trial_d2;
                }
            }
        }
        c.row(static_cast<Eigen::Index>(j)) = x.row(static_cast<Eigen::Index>(pick));
        for (std::size_t i = 0; i < n; ++i)
            best_d2[i] = std::min(best_d2[i], squared_distance(x, static_cast<Eigen::Index>(i), c, static_cast<Eigen::Index>(j)));
        d2 = best_d2;
    }
    return c;
}

inline std::size_t nearest(const Eigen::MatrixXd& x, Eigen::Index row, const Eigen::MatrixXd& c) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < c.rows(); ++j) {
        const double d = squared_distance(x, row, c, j);
        if (d < best_d) {
            best_d = d;
            best = static_cast<std::size_t>(j);
        }
    }
    return best;
}

/// Moves the point farthest from its centroid into each empty cluster.
inline void repair_empty(const Eigen::MatrixXd& x, Eigen::MatrixXd& c, std::vector<std::size_t>& assign) {
    const std::size_t k = static_cast<std::size_t>(c.rows());
    std::vector<std::size_t> sizes(k, 0);
    for (auto a : assign) ++sizes[a];
    for (std::size_t j = 0; j < k; ++j) {
        if (sizes[j] != 0) continue;
        std::size_t far = assign.size();
        double far_d = -1;
        for (std::size_t i = 0; i < assign.size(); ++i) {
            if (sizes[assign[i]] < 2) continue;
            const double d = squared_distance(x, static_cast<Eigen::Index>(i), c, static_cast<Eigen::Index>(assign[i]));
            if (d > far_d) {
                far_d = d;
                far = i;
            }
        }
        if (far == assign.size()) continue; // fewer points than clusters; cannot happen when k <= n
        --sizes[assign[far]];
        assign[far] = j;
        sizes[j] = 1;
        c.row(static_cast<Eigen::Index>(j)) = x.row(static_cast<Eigen::Index>(far));
    }
}

inline void update_centroids(const Eigen::MatrixXd& x, Eigen::MatrixXd& c, const std::vector<std::size_t>& assign) {
    const auto k = c.rows();
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k, x.cols());
    std::vector<double> count(static_cast<std::size_t>(k), 0.0);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto a = assign[static_cast<std::size_t>(i)];
        sum.row(static_cast<Eigen::Index>(a)) += x.row(i);
        count[a] += 1.0;
    }
    for (Eigen::Index j = 0; j < k; ++j)
        if (count[static_cast<std::size_t>(j)] > 0) c.row(j) = sum.row(j) / count[static_cast<std::size_t>(j)];
}

/// Single-point transfers after Lloyd converges: moving x from cluster a
/// (size na) to b (size nb) changes the distortion by
/// nb/(nb+1)|x-cb|^2 - na/(na-1)|x-ca|^2. Applies strictly improving moves
/// until none remain. Returns whether anything moved.
inline bool transfer_refine(const Eigen::MatrixXd& x, Eigen::MatrixXd& c, std::vector<std::size_t>& assign) {
    const auto k = static_cast<std::size_t>(c.rows());
    std::vector<double> size(k, 0.0);
    for (auto a : assign) size[a] += 1;
    bool any = false;
    for (bool moved = true; moved;) {
        moved = false;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const std::size_t a = assign[static_cast<std::size_t>(i)];
            if (size[a] <= 1) continue;
            const double na = size[a];
            const double cost_out = na / (na - 1) * squared_distance(x, i, c, static_cast<Eigen::Index>(a));
            std::size_t best = a;
            double best_gain = 1e-12 * std::max(1.0, cost_out);
            for (std::size_t b = 0; b < k; ++b) {
                if (b == a) continue;
                const double nb = size[b];
                const double gain = cost_out - nb / (nb + 1) * squared_distance(x, i, c, static_cast<Eigen::Index>(b));
                if (gain > best_gain) {
                    best_gain = gain;
                    best = b;
                }
            }
            if (best == a) continue;
            const auto ai = static_cast<Eigen::Index>(a), bi = static_cast<Eigen::Index>(best);
            c.row(ai) = (c.row(ai) * na - x.row(i)) / (na - 1);
            c.row(bi) = (c.row(bi) * size[best] + x.row(i)) / (size[best] + 1);
            size[a] -= 1;
            size[best] += 1;
            assign[static_cast<std::size_t>(i)] = best;
            moved = any = true;
        }
    }
    if (any) update_centroids(x, c, assign);
    return any;
}

/// Lloyd iterations from given centroids, then single-point transfers.
inline void lloyd_from(const Eigen::MatrixXd& x, kmeans_result& r, std::size_t max_iter) {
    const std::size_t k = static_cast<std::size_t>(r.centroids.rows());
    r.k = k;
    r.assignments.assign(static_cast<std::size_t>(x.rows()), k); // sentinel: nothing assigned yet
    r.iterations = 0;
    r.distortion_history.clear();
    for (std::size_t iter = 0; iter < std::max<std::size_t>(max_iter, 1); ++iter) {
        std::vector<std::size_t> next(r.assignments.size());
        for (Eigen::Index i = 0; i < x.rows(); ++i) next[static_cast<std::size_t>(i)] = nearest(x, i, r.centroids);
        repair_empty(x, r.centroids, next);
        const bool stable = next == r.assignments;
        r.assignments = std::move(next);
        if (stable) break;
        update_centroids(x, r.centroids, r.assignments);
        r.iterations = iter + 1;
        r.distortion_history.push_back(total_distortion(x, r.centroids, r.assignments));
    }
    if (transfer_refine(x, r.centroids, r.assignments))
        r.distortion_history.push_back(total_distortion(x, r.centroids, r.assignments));
    r.distortion = total_distortion(x, r.centroids, r.assignments);
}

inline kmeans_result lloyd(const Eigen::MatrixXd& x, std::size_t k, std::uint64_t seed, std::size_t max_iter) {
    rng gen(seed);
    kmeans_result r;
    r.seed = seed;
    r.centroids = seed_centroids(x, k, gen);
    lloyd_from(x, r, max_iter);
    return r;
}

inline constexpr std::size_t swap_all_points = 32;
inline constexpr std::size_t swap_candidates = 12;
inline constexpr std::size_t swap_rounds = 4;

/// Centroid-swap local search: moves one centroid onto a data point, re-runs
/// Lloyd, keeps the result if the distortion drops. Candidates are every
/// point for small inputs, else a D^2-weighted sample.
inline void swap_refine(const Eigen::MatrixXd& x, kmeans_result& best, std::uint64_t seed, std::size_t max_iter) {
    const auto n = static_cast<std::size_t>(x.rows());
    const std::size_t k = best.k;
    if (k < 2 || k >= n) return;
    rng gen(seed);
    for (std::size_t round = 0; round < swap_rounds; ++round) {
        std::vector<std::size_t> candidates;
        if (n <= swap_all_points) {
            candidates.resize(n);
            std::iota(candidates.begin(), candidates.end(), 0);
        } else {
            std::vector<double> d2(n);
            double total = 0;
            for (std::size_t i = 0; i < n; ++i)
                total += d2[i] = squared_distance(x, static_cast<Eigen::Index>(i), best.centroids,
                                                  static_cast<Eigen::Index>(best.assignments[i]));
            for (std::size_t t = 0; t < swap_candidates && total > 0; ++t) {
                const double target = gen.uniform() * total;
                double acc = 0;
                std::size_t pick = n - 1;
                for (std::size_t i = 0; i < n; ++i) {
                    acc += d2[i];
                    if (acc > target && d2[i] > 0) {
                        pick = i;
                        break;
                    }
                }
                candidates.push_back(pick);
            }
        }
        bool improved = false;
        for (std::size_t j = 0; j < k && !improved; ++j) {
            for (std::size_t p : candidates) {
                kmeans_result trial;
                trial.seed = best.seed;
                trial.best_restart = best.best_restart;
                trial.centroids = best.centroids;
                trial.centroids.row(static_cast<Eigen::Index>(j)) = x.row(static_cast<Eigen::Index>(p));
                lloyd_from(x, trial, max_iter);
                if (trial.distortion < best.distortion * (1 - 1e-12)) {
                    best = std::move(trial);
                    improved = true;
                    break;
                }
            }
        }
        if (!improved) break;
    }
}

} // namespace detail

/// Best-of-n_init Lloyd runs (plus single-point transfers) from D^2-weighted seeds,
/// followed by a centroid-swap search on the winner. Restart i draws from
/// derive_seed(seed, i); the lowest distortion wins, ties to the earlier
/// restart.
inline kmeans_result kmeans(const Eigen::MatrixXd& x, std::size_t k, std::uint64_t seed,
                            const kmeans_options& options = {}) {
    if (k < 1) throw error("kmeans: K must be >= 1");
    if (k > static_cast<std::size_t>(x.rows()))
        throw error("kmeans: K=" + std::to_string(k) + " exceeds " + std::to_string(x.rows()) + " rows");
    std::optional<kmeans_result> best;
    for (std::size_t i = 0; i < std::max<std::size_t>(options.n_init, 1); ++i) {
        auto r = detail::lloyd(x, k, derive_seed(seed, i), options.max_iter);
        r.best_restart = i;
        if (!best || r.distortion < best->distortion) best = std::move(r);
    }
    detail::swap_refine(x, *best, derive_seed(seed, options.n_init), options.max_iter);
    best->seed = seed;
    return std::move(*best);
}

// ---------------------------------------------------------------------------
// Choice of K by the distortion-ratio criterion
//
//   alpha_2 = 1 - 3 / (4 Nd)
//   alpha_K = alpha_{K-1} + (1 - alpha_{K-1}) / 6      (K > 2)
//   f(1) = 1;  f(K) = 1 if S_{K-1} = 0, else S_K / (alpha_K S_{K-1})

struct f_curve {
    std::size_t dims = 0;
    std::vector<double> distortion; // S_K at index K-1
    std::vector<double> alpha;      // alpha_K at index K-1; alpha_1 unused (0)
    std::vector<double> f;          // f(K) at index K-1
    std::vector<kmeans_result> runs;

    std::size_t k_max() const { return f.size(); }
    double f_of(std::size_t k) const { return f.at(k - 1); }
};

inline double pham_alpha(std::size_t k, std::size_t dims) {
    if (k < 2 || dims == 0) return 0.0;
    double a = 1.0 - 3.0 / (4.0 * static_cast<double>(dims));
    for (std::size_t i = 3; i <= k; ++i) a += (1.0 - a) / 6.0;
    return a;
}

/// f(K) from consecutive distortions.
inline std::vector<double> pham_f_values(std::span<const double> distortion, std::size_t dims) {
    std::vector<double> f(distortion.size(), 1.0);
    for (std::size_t k = 2; k <= distortion.size(); ++k) {
        const double prev = distortion[k - 2];
        if (prev == 0.0 || dims == 0) continue;
        f[k - 1] = distortion[k - 1] / (pham_alpha(k, dims) * prev);
    }
    return f;
}

/// Runs kmeans for K = 1..k_max (K uses derive_seed(seed, K)) and evaluates f.
inline f_curve pham_f_curve(const Eigen::MatrixXd& x, std::size_t k_max, std::uint64_t seed,
                            const kmeans_options& options = {}) {
    if (k_max < 1) throw error("f-curve: k_max must be >= 1");
    if (static_cast<std::size_t>(x.rows()) < k_max)
        throw error("f-curve: " + std::to_string(x.rows()) + " rows is fewer than k_max=" + std::to_string(k_max));
    f_curve curve;
    curve.dims = static_cast<std::size_t>(x.cols());
    for (std::size_t k = 1; k <= k_max; ++k) {
        curve.runs.push_back(kmeans(x, k, derive_seed(seed, k), options));
        curve.distortion.push_back(curve.runs.back().distortion);
        curve.alpha.push_back(pham_alpha(k, curve.dims));
    }
    curve.f = pham_f_values(curve.distortion, curve.dims);
    return curve;
}

/// argmin f(K) over K with f(K) < threshold; 1 if none qualify. Ties to the
/// smaller K.
inline std::size_t select_k(std::span<const double> f, double threshold = 0.85) {
    std::size_t chosen = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k <= f.size(); ++k) {
        if (f[k - 1] < threshold && f[k - 1] < best) {
            best = f[k - 1];
            chosen = k;
        }
    }
    return chosen;
}

inline std::size_t select_k(const f_curve& curve, double threshold = 0.85) { return select_k(curve.f, threshold); }

// ---------------------------------------------------------------------------
// Cell clustering

struct cluster_config {
    double variance_fraction = 0.95;
    std::size_t k_max = 10;
    double threshold = 0.85;
    std::uint64_t seed = 1;
    kmeans_options kmeans;
};

struct parent_link {
    std::string model_id;
    std::size_t cluster_index = 0;
    std::string label;
};

struct cluster_model {
    grid_spec grid;
    std::vector<cell_id> cells; // row order
    kmeans_result result;
    f_curve curve;
    std::size_t chosen_k = 1;
    std::vector<std::string> labels; // by cluster index
    std::optional<parent_link> parent;
    std::size_t retained_dim = 0;
    double variance_retained = 1.0;
    cluster_config config;

    std::size_t size() const { return cells.size(); }
    const std::string& label_of_row(std::size_t r) const { return labels.at(result.assignments.at(r)); }

    std::optional<std::size_t> index_of_label(std::string_view label) const {
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == label) return i;
        return std::nullopt;
    }
};

/// α, β, γ, ... for the first 24 clusters, then c25, c26, ...
inline std::string greek_label(std::size_t i) {
    static constexpr const char* names[] = {"α", "β", "γ", "δ", "ε", "ζ", "η", "θ", "ι", "κ", "λ", "μ",
                                            "ν", "ξ", "ο", "π", "ρ", "σ", "τ", "υ", "φ", "χ", "ψ", "ω"};
    if (i < std::size(names)) return names[i];
    return "c" + std::to_string(i + 1);
}

namespace detail {

/// Reorders clusters by descending weight (ties by index) and rewrites
/// assignments and centroids to match.
inline void order_by_weight(kmeans_result& r, std::span<const double> weights) {
    std::vector<double> mass(r.k, 0.0);
    for (std::size_t i = 0; i < r.assignments.size(); ++i) mass[r.assignments[i]] += weights[i];
    std::vector<std::size_t> order(r.k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mass[a] > mass[b]; });
    std::vector<std::size_t> rank(r.k);
    for (std::size_t j = 0; j < r.k; ++j) rank[order[j]] = j;
    for (auto& a : r.assignments) a = rank[a];
    Eigen::MatrixXd c(r.centroids.rows(), r.centroids.cols());
    for (std::size_t j = 0; j < r.k; ++j) c.row(static_cast<Eigen::Index>(j)) = r.centroids.row(static_cast<Eigen::Index>(order[j]));
    r.centroids = std::move(c);
}

inline cluster_model run_pipeline(const dominance_matrix& m, const cluster_config& config,
                                  std::span<const double> weights, const std::string& label_prefix) {
    if (m.rows() < 2) throw error("clustering needs at least 2 cells, got " + std::to_string(m.rows()));
    if (m.rows() < config.k_max)
        throw error("clustering: " + std::to_string(m.rows()) + " cells is fewer than k_max=" +
                    std::to_string(config.k_max));
    if (!weights.empty() && weights.size() != m.rows()) throw error("clustering: weight count does not match rows");

    projection p = pca_fit(m, config.variance_fraction);
    Eigen::MatrixXd x = project(p, m);

    cluster_model model;
    model.grid = m.grid;
    model.cells = m.cells;
    model.config = config;
    model.retained_dim = p.retained_dim;
    model.variance_retained = p.retained_share();
    model.curve = pham_f_curve(x, config.k_max, config.seed, config.kmeans);
    model.chosen_k = select_k(model.curve, config.threshold);
    model.result = model.curve.runs[model.chosen_k - 1];

    std::vector<double> w(weights.begin(), weights.end());
    if (w.empty()) {
        // Without counts, observed concepts per cell stand in for volume.
        for (std::size_t r = 0; r < m.rows(); ++r) {
            auto row = m.row(r);
            w.push_back(static_cast<double>(std::accumulate(row.begin(), row.end(), 0u)));
        }
    }
    order_by_weight(model.result, w);
    for (std::size_t j = 0; j < model.chosen_k; ++j)
        model.labels.push_back(label_prefix.empty() ? greek_label(j) : label_prefix + std::to_string(j + 1));
    return model;
}

} // namespace detail

/// PCA -> projection -> f-curve -> K choice -> K-means at the chosen K.
/// Clusters are ordered by total weight (observation volume per cell), so
/// cluster 0 is α.
inline cluster_model cluster_cells(const dominance_matrix& m, const cluster_config& config = {},
                                   std::span<const double> weights = {}) {
    return detail::run_pipeline(m, config, weights, "");
}

/// Re-runs the clustering pipeline on the cells of one parent cluster.
/// Children are labelled <parent label>1, <parent label>2, ...
inline cluster_model subcluster(const cluster_model& parent, std::string_view label, const dominance_matrix& m,
                                const cluster_config& config = {}, std::span<const double> weights = {}) {
    auto index = parent.index_of_label(label);
    if (!index) throw error("subcluster: unknown cluster label '" + std::string(label) + "'");
    if (!weights.empty() && weights.size() != m.rows()) throw error("subcluster: weight count does not match rows");

    std::map<cell_id, std::size_t> row_of;
    for (std::size_t r = 0; r < m.rows(); ++r) row_of.emplace(m.cells[r], r);

    std::vector<std::size_t> rows;
    std::vector<double> sub_weights;
    for (std::size_t i = 0; i < parent.cells.size(); ++i) {
        if (parent.result.assignments[i] != *index) continue;
        auto it = row_of.find(parent.cells[i]);
        if (it == row_of.end())
            throw error("subcluster: cell " + to_string(parent.cells[i]) + " missing from matrix");
        rows.push_back(it->second);
    }
    std::sort(rows.begin(), rows.end());
    if (!weights.empty())
        for (auto r : rows) sub_weights.push_back(weights[r]);

    if (rows.size() < std::max<std::size_t>(config.k_max, 2))
        throw error("subcluster: cluster '" + std::string(label) + "' has " + std::to_string(rows.size()) +
                    " cells, fewer than k_max=" + std::to_string(config.k_max));

    auto model = detail::run_pipeline(m.select_rows(rows), config, sub_weights, std::string(label));
    model.parent = parent_link{"top", *index, std::string(label)};
    return model;
}

// ---------------------------------------------------------------------------
// TSV output

inline void write_clusters(std::ostream& out, const cluster_model& model) {
    out << "# lexdial clusters cell_size_arcmin=" << format_double(model.grid.cell_size_arcmin)
        << " seed=" << model.config.seed << " k=" << model.chosen_k << " kmax=" << model.config.k_max
        << " threshold=" << format_double(model.config.threshold)
        << " variance_fraction=" << format_double(model.config.variance_fraction)
        << " retained_dim=" << model.retained_dim
        << " variance_retained=" << format_double(model.variance_retained)
        << " distortion=" << format_double(model.result.distortion)
        << " parent=" << (model.parent ? model.parent->label : "-") << "\n";
    out << "cell\tcluster_index\tlabel\tparent_label\n";
    const std::string parent = model.parent ? model.parent->label : "-";
    for (std::size_t r = 0; r < model.cells.size(); ++r)
        out << to_string(model.cells[r]) << '\t' << model.result.assignments[r] << '\t' << model.label_of_row(r)
            << '\t' << parent << '\n';
}

/// Restores cells, assignments, labels, parent link and metadata. Centroids
/// and the f-curve are not part of clusters.tsv.
inline cluster_model read_clusters(std::istream& in) {
    cluster_model model;
    std::string line;
    bool header = false;
    std::size_t line_no = 0;
    std::string parent_label = "-";
    while (detail::getline_clean(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line.front() == '#') {
            auto kv = detail::parse_metadata(line);
            if (auto it = kv.find("cell_size_arcmin"); it != kv.end())
                model.grid.cell_size_arcmin = parse_double(it->second, "cell_size_arcmin");
            if (auto it = kv.find("seed"); it != kv.end()) model.config.seed = parse_integer<std::uint64_t>(it->second, "seed");
            if (auto it = kv.find("kmax"); it != kv.end()) model.config.k_max = parse_integer<std::size_t>(it->second, "kmax");
            if (auto it = kv.find("threshold"); it != kv.end()) model.config.threshold = parse_double(it->second, "threshold");
            if (auto it = kv.find("variance_fraction"); it != kv.end())
                model.config.variance_fraction = parse_double(it->second, "variance_fraction");
            if (auto it = kv.find("retained_dim"); it != kv.end())
                model.retained_dim = parse_integer<std::size_t>(it->second, "retained_dim");
            if (auto it = kv.find("variance_retained"); it != kv.end())
                model.variance_retained = parse_double(it->second, "variance_retained");
            if (auto it = kv.find("distortion"); it != kv.end())
                model.result.distortion = parse_double(it->second, "distortion");
            continue;
        }
        if (!header) {
            if (line != "cell\tcluster_index\tlabel\tparent_label") throw error("clusters: unexpected header '" + line + "'");
            header = true;
            continue;
        }
        auto f = detail::split(line, '\t');
        if (f.size() != 4) throw error("clusters: line " + std::to_string(line_no) + ": expected 4 fields");
        model.cells.push_back(parse_cell_id(f[0]));
        auto idx = parse_integer<std::size_t>(f[1], "cluster_index");
        model.result.assignments.push_back(idx);
        if (idx >= model.labels.size()) model.labels.resize(idx + 1);
        if (model.labels[idx].empty()) model.labels[idx] = std::string(f[2]);
        else if (model.labels[idx] != f[2]) throw error("clusters: cluster " + std::to_string(idx) + " has two labels");
        parent_label = std::string(f[3]);
    }
    if (!header) throw error("clusters: missing header");
    for (std::size_t j = 0; j < model.labels.size(); ++j)
        if (model.labels[j].empty()) throw error("clusters: cluster index " + std::to_string(j) + " has no cells");
    model.chosen_k = model.labels.size();
    model.result.k = model.chosen_k;
    if (parent_label != "-") model.parent = parent_link{"top", 0, parent_label};
    model.grid.validate();
    return model;
}

inline void write_fcurve(std::ostream& out, const cluster_model& model) {
    out << "# lexdial fcurve dims=" << model.curve.dims << " chosen_k=" << model.chosen_k
        << " threshold=" << format_double(model.config.threshold) << " seed=" << model.config.seed << "\n";
    out << "K\tS_K\tf_K\n";
    for (std::size_t k = 1; k <= model.curve.k_max(); ++k)
        out << k << '\t' << format_double(model.curve.distortion[k - 1]) << '\t'
            << format_double(model.curve.f[k - 1]) << '\n';
}

} // namespace lexdial
