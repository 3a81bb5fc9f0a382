#pragma once

// Discrete stationary Fokker-Planck-Kolmogorov equation G^T mu = 0, sum mu = 1,
// and the measure diagnostics built on it.

#include "ergodic/error.hpp"
#include "ergodic/generator.hpp"
#include "ergodic/grid.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <ostream>
#include <vector>

#include <fmt/format.h>

namespace ergodic {

/// Cell masses of a probability measure on the grid (densities are
/// weights / cell_volume).
struct InvariantMeasure {
    Vector weights;
    std::shared_ptr<const Grid> grid;
    double residual = 0.0;  // ||G^T mu||_inf

    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(weights.size()); }
};

namespace detail {

using ColSparse = Eigen::SparseMatrix<double, Eigen::ColMajor>;

/// Solves a sparse system with LU plus `rounds` steps of iterative refinement.
class RefinedSolver {
public:
    explicit RefinedSolver(const ColSparse& a) : a_(a) {
        lu_.analyzePattern(a_);
        lu_.factorize(a_);
        if (lu_.info() != Eigen::Success)
            throw NumericalError("sparse LU factorization failed: " + lu_.lastErrorMessage());
    }

    [[nodiscard]] Vector solve(const Vector& rhs, int rounds = 2) const {
        Vector x = lu_.solve(rhs);
        if (lu_.info() != Eigen::Success) throw NumericalError("sparse LU solve failed");
        for (int r = 0; r < rounds; ++r) {
            const Vector res = rhs - a_ * x;
            x += lu_.solve(res);
        }
        if (!x.allFinite())
            throw NumericalError(fmt::format(
                "sparse solve produced non-finite values (log|det| = {:.6g})",
                lu_.logAbsDeterminant()));
        return x;
    }

private:
    const ColSparse& a_;
    Eigen::SparseLU<ColSparse, Eigen::COLAMDOrdering<int>> lu_;
};

/// G^T with row `k` replaced by the normalization row of ones.
inline ColSparse bordered_transpose(const SparseMatrix& g, std::size_t k) {
    const Eigen::Index n = g.rows();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(g.nonZeros() + n));
    for (Eigen::Index r = 0; r < g.outerSize(); ++r)
        for (SparseMatrix::InnerIterator it(g, r); it; ++it)
            if (static_cast<std::size_t>(it.col()) != k)
                trips.emplace_back(static_cast<int>(it.col()), static_cast<int>(r), it.value());
    for (Eigen::Index i = 0; i < n; ++i)
        trips.emplace_back(static_cast<int>(k), static_cast<int>(i), 1.0);
    ColSparse a(n, n);
    a.setFromTriplets(trips.begin(), trips.end());
    return a;
}

inline Vector bordered_solve(const SparseMatrix& g, std::size_t k) {
    const ColSparse a = bordered_transpose(g, k);
    RefinedSolver solver(a);
    Vector rhs = Vector::Zero(g.rows());
    rhs[static_cast<Eigen::Index>(k)] = 1.0;
    Vector mu = solver.solve(rhs);
    mu /= mu.sum();
    return mu;
}

}  // namespace detail

/// Unique invariant probability of an irreducible generator.
///
/// Solves the bordered system (row with the largest |diagonal| replaced by
/// sum mu = 1), then repeats with a different replaced row: both must agree
/// within 10 tol, certifying that the kernel of G^T is one-dimensional.
/// Throws PreconditionError for reducible G and NumericalError when the
/// residual or the kernel check fails.
inline InvariantMeasure stationary_measure(const GeneratorMatrix& g, double tol = 1e-10) {
    const std::size_t n = g.size();
    if (n == 0) throw ArgumentError("stationary_measure: empty generator");
    const auto diag = check_markov_generator(g);
    if (!diag.irreducible)
        throw PreconditionError(
            "stationary_measure: generator is reducible, the invariant measure is not unique");

    InvariantMeasure mu;
    mu.grid = g.grid;
    if (n == 1) {
        mu.weights = Vector::Ones(1);
        return mu;
    }

    std::size_t k = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = std::abs(g.matrix.coeff(static_cast<Eigen::Index>(i),
                                                 static_cast<Eigen::Index>(i)));
        if (v > best) {
            best = v;
            k = i;
        }
    }
    mu.weights = detail::bordered_solve(g.matrix, k);
    mu.residual = (g.matrix.transpose() * mu.weights).cwiseAbs().maxCoeff();
    if (!(mu.residual <= tol))
        throw NumericalError(fmt::format(
            "stationary_measure: residual ||G^T mu|| = {:.3e} exceeds tol {:.3e} "
            "(N = {}, max|diag| = {:.3e})",
            mu.residual, tol, n, best));

    const std::size_t k2 = (k + n / 2) % n;
    const Vector second = detail::bordered_solve(g.matrix, k2);
    const double spread = (second - mu.weights).cwiseAbs().maxCoeff();
    if (!(spread <= 10.0 * tol))
        throw NumericalError(fmt::format(
            "stationary_measure: kernel check failed, bordered solves differ by {:.3e}", spread));
    return mu;
}

/// Integral of |x|^order against mu, for each requested order.
inline std::vector<double> measure_moments(const InvariantMeasure& mu,
                                           const std::vector<double>& orders) {
    if (!mu.grid) throw ArgumentError("measure_moments: measure has no grid");
    std::vector<double> out;
    out.reserve(orders.size());
    for (double ell : orders) {
        if (ell < 0.0) throw ArgumentError("measure_moments: orders must be >= 0");
        double s = 0.0;
        for (std::size_t i = 0; i < mu.size(); ++i)
            s += std::pow(mu.grid->point(i).norm(), ell) * mu.weights[static_cast<Eigen::Index>(i)];
        out.push_back(s);
    }
    return out;
}

struct BoxRatio {
    double half_width = 0.0;  // box [-w, w]^m; infinity for measures without a grid
    double ratio = 0.0;       // max mu / min mu over the box
};

struct PositivityReport {
    double min_weight = 0.0;
    std::size_t argmin = 0;
    std::size_t zero_count = 0;
    bool strictly_positive = false;
    std::vector<BoxRatio> boxes;
};

/// Minimum weight and Harnack-style max/min ratios over centered boxes of
/// half-width fraction * R for each fraction.
inline PositivityReport positivity_report(const InvariantMeasure& mu,
                                          const std::vector<double>& fractions = {0.25, 0.5, 0.75,
                                                                                  1.0}) {
    PositivityReport rep;
    if (mu.size() == 0) return rep;
    rep.min_weight = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double w = mu.weights[static_cast<Eigen::Index>(i)];
        if (w < rep.min_weight) {
            rep.min_weight = w;
            rep.argmin = i;
        }
        if (w <= 0.0) ++rep.zero_count;
    }
    rep.strictly_positive = rep.zero_count == 0;

    auto ratio_over = [&](auto&& inside) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = 0.0;
        for (std::size_t i = 0; i < mu.size(); ++i)
            if (inside(i)) {
                const double w = mu.weights[static_cast<Eigen::Index>(i)];
                lo = std::min(lo, w);
                hi = std::max(hi, w);
            }
        return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    };

    if (!mu.grid) {
        rep.boxes.push_back({std::numeric_limits<double>::infinity(),
                             ratio_over([](std::size_t) { return true; })});
        return rep;
    }
    for (double frac : fractions) {
        const double w = frac * mu.grid->radius();
        rep.boxes.push_back({w, ratio_over([&](std::size_t i) {
                                 return mu.grid->point(i).cwiseAbs().maxCoeff() <=
                                        w * (1.0 + 1e-12);
                             })});
    }
    return rep;
}

namespace detail {

inline void check_same_support(const InvariantMeasure& a, const InvariantMeasure& b) {
    if (a.size() != b.size())
        throw ArgumentError("measures live on different grids (sizes differ)");
    if (a.grid && b.grid && !(*a.grid == *b.grid))
        throw ArgumentError("measures live on different grids");
}

}  // namespace detail

/// Squared Hellinger distance 1/2 sum (sqrt(mu1_i) - sqrt(mu2_i))^2, in [0, 1].
inline double hellinger_sq(const InvariantMeasure& mu1, const InvariantMeasure& mu2) {
    detail::check_same_support(mu1, mu2);
    double s = 0.0;
    for (Eigen::Index i = 0; i < mu1.weights.size(); ++i) {
        const double d = std::sqrt(std::max(mu1.weights[i], 0.0)) -
                         std::sqrt(std::max(mu2.weights[i], 0.0));
        s += d * d;
    }
    return 0.5 * s;
}

/// Total variation as mass of positive plus negative parts, in [0, 2].
inline double tv_distance(const InvariantMeasure& mu1, const InvariantMeasure& mu2) {
    detail::check_same_support(mu1, mu2);
    return (mu1.weights - mu2.weights).cwiseAbs().sum();
}

/// Measure wrapper for plain probability vectors.
inline InvariantMeasure make_measure(Vector weights, std::shared_ptr<const Grid> grid = nullptr) {
    return {std::move(weights), std::move(grid), 0.0};
}

/// CSV: x0..x{m-1}, weight, density.
inline void write_measure_csv(std::ostream& os, const InvariantMeasure& mu) {
    if (!mu.grid) throw ArgumentError("write_measure_csv: measure has no grid");
    const int m = mu.grid->dim();
    for (int ax = 0; ax < m; ++ax) os << "x" << ax << ",";
    os << "weight,density\n";
    const double vol = mu.grid->cell_volume();
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const Vector x = mu.grid->point(i);
        for (int ax = 0; ax < m; ++ax) os << fmt::format("{:.17g},", x[ax]);
        const double w = mu.weights[static_cast<Eigen::Index>(i)];
        os << fmt::format("{:.17g},{:.17g}\n", w, w / vol);
    }
}

}  // namespace ergodic
