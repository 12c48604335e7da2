#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lexdial/aggregate.hpp"
#include "lexdial/error.hpp"

namespace lexdial {

/// Fitted principal-component projection.
///
/// `components` holds one orthonormal basis vector per row, ordered by
/// non-increasing eigenvalue; only the first `retained_dim` rows are used by
/// project(). Eigenvalues come from the n-1 normalized sample covariance.
struct projection {
    Eigen::RowVectorXd mean;
    Eigen::MatrixXd components;
    Eigen::VectorXd eigenvalues;
    std::size_t retained_dim = 0;
    double variance_fraction = 0.95;
    std::vector<std::string> warnings;

    double total_variance() const { return eigenvalues.sum(); }

    double retained_share() const { return cumulative_share(retained_dim); }

    /// Share of total variance held by the first d components.
    double cumulative_share(std::size_t d) const {
        double total = 0, head = 0;
        for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
            total += eigenvalues[i];
            if (static_cast<std::size_t>(i) < d) head += eigenvalues[i];
        }
        return total <= 0 ? 1.0 : head / total;
    }
};

namespace detail {

/// Eigenvalues below this fraction of the spectrum's mass are numerical
/// noise and are zeroed before the retention rule is applied.
inline constexpr double eigen_floor = 1e-12;

inline void flip_to_positive_max(Eigen::MatrixXd& rows) {
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        Eigen::Index arg = 0;
        rows.row(i).cwiseAbs().maxCoeff(&arg);
        if (rows(i, arg) < 0) rows.row(i) *= -1.0;
    }
}

} // namespace detail

/// Smallest d with cumulative share >= fraction. Shares are computed from a
/// non-increasing, non-negative spectrum.
inline std::size_t retained_dimension(const Eigen::VectorXd& eigenvalues, double fraction) {
    // Summed in the same order as the running total below so that a full
    // spectrum reaches a share of exactly 1.
    double total = 0;
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) total += eigenvalues[i];
    if (total <= 0) return 0;
    double cumulative = 0;
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
        cumulative += eigenvalues[i];
        if (cumulative / total >= fraction) return static_cast<std::size_t>(i + 1);
    }
    return static_cast<std::size_t>(eigenvalues.size());
}

inline projection pca_fit(const Eigen::MatrixXd& data, double variance_fraction = 0.95) {
    if (data.rows() < 2) throw error("pca_fit: need at least 2 rows");
    if (!(variance_fraction > 0.0 && variance_fraction <= 1.0))
        throw error("pca_fit: variance fraction must be in (0, 1]");

    projection p;
    p.variance_fraction = variance_fraction;
    p.mean = data.colwise().mean();
    const Eigen::MatrixXd centered = data.rowwise() - p.mean;
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(data.rows() - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw std::runtime_error("pca_fit: eigendecomposition failed");

    // Eigen returns ascending order; flip to descending.
    const Eigen::Index p_dim = cov.rows();
    p.eigenvalues = solver.eigenvalues().reverse();
    p.components = solver.eigenvectors().rowwise().reverse().transpose();

    const double mass = p.eigenvalues.cwiseAbs().sum();
    for (Eigen::Index i = 0; i < p_dim; ++i) {
        if (p.eigenvalues[i] < 0 || p.eigenvalues[i] <= detail::eigen_floor * mass) p.eigenvalues[i] = 0;
    }
    detail::flip_to_positive_max(p.components);

    p.retained_dim = retained_dimension(p.eigenvalues, variance_fraction);
    if (p.retained_dim == 0) p.warnings.push_back("zero total variance: all rows identical");
    return p;
}

inline Eigen::MatrixXd to_eigen(const dominance_matrix& m) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c)
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m.at(r, c);
    return out;
}

inline projection pca_fit(const dominance_matrix& m, double variance_fraction = 0.95) {
    return pca_fit(to_eigen(m), variance_fraction);
}

/// X = (data - mean) * componentsᵀ, keeping the retained components.
inline Eigen::MatrixXd project(const projection& p, const Eigen::MatrixXd& data) {
    if (data.cols() != p.mean.size())
        throw error("project: matrix has " + std::to_string(data.cols()) + " features, projection expects " +
                    std::to_string(p.mean.size()));
    const auto d = static_cast<Eigen::Index>(p.retained_dim);
    return (data.rowwise() - p.mean) * p.components.topRows(d).transpose();
}

inline Eigen::MatrixXd project(const projection& p, const dominance_matrix& m) { return project(p, to_eigen(m)); }

/// Maps reduced coordinates back into feature space.
inline Eigen::MatrixXd reconstruct(const projection& p, const Eigen::MatrixXd& reduced) {
    const auto d = static_cast<Eigen::Index>(p.retained_dim);
    return (reduced * p.components.topRows(d)).rowwise() + p.mean;
}

// projection.tsv: one keyed row per line, values tab-separated.
inline void write_projection(std::ostream& out, const projection& p) {
    auto row = [&](const char* key, auto&& vec) {
        out << key;
        for (Eigen::Index i = 0; i < vec.size(); ++i) out << '\t' << format_double(vec[i]);
        out << '\n';
    };
    out << "# lexdial projection\n";
    out << "variance_fraction\t" << format_double(p.variance_fraction) << '\n';
    out << "retained_dim\t" << p.retained_dim << '\n';
    out << "retained_share\t" << format_double(p.retained_share()) << '\n';
    row("eigenvalues", p.eigenvalues);
    row("mean", p.mean);
    for (Eigen::Index i = 0; i < p.components.rows(); ++i) row("component", Eigen::RowVectorXd(p.components.row(i)));
}

inline projection read_projection(std::istream& in) {
    projection p;
    std::vector<std::vector<double>> comps;
    std::vector<double> eig, mean;
    std::string line;
    bool have_dim = false;
    while (detail::getline_clean(in, line)) {
        if (line.empty() || line.front() == '#') continue;
        auto f = detail::split(line, '\t');
        std::vector<double> values;
        for (std::size_t i = 1; i < f.size(); ++i) values.push_back(parse_double(f[i], f[0]));
        if (f[0] == "variance_fraction" && values.size() == 1) p.variance_fraction = values[0];
        else if (f[0] == "retained_dim" && f.size() == 2) {
            p.retained_dim = parse_integer<std::size_t>(f[1], "retained_dim");
            have_dim = true;
        } else if (f[0] == "retained_share") continue;
        else if (f[0] == "eigenvalues") eig = std::move(values);
        else if (f[0] == "mean") mean = std::move(values);
        else if (f[0] == "component") comps.push_back(std::move(values));
        else throw error("projection: unknown row '" + std::string(f[0]) + "'");
    }
    if (!have_dim || mean.empty() || eig.size() != mean.size() || comps.size() != mean.size())
        throw error("projection: incomplete or inconsistent file");
    if (p.retained_dim > mean.size()) throw error("projection: retained_dim exceeds feature count");
    const auto n = static_cast<Eigen::Index>(mean.size());
    p.mean = Eigen::Map<Eigen::RowVectorXd>(mean.data(), n);
    p.eigenvalues = Eigen::Map<Eigen::VectorXd>(eig.data(), n);
    p.components.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (comps[static_cast<std::size_t>(i)].size() != mean.size()) throw error("projection: ragged component row");
        p.components.row(i) = Eigen::Map<Eigen::RowVectorXd>(comps[static_cast<std::size_t>(i)].data(), n);
    }
    return p;
}

} // namespace lexdial
