#pragma once

// Monotone finite-difference discretization of L_alpha as a Markov generator
// (nonnegative off-diagonals, zero row sums) on a truncated tensor grid with
// reflecting closure: rates pointing out of the grid are dropped.
//
// Stencil per node and axis p (spacing h_p):
//   diffusion   net axis rate  a_pp/h_p^2 - sum_{q != p} |a_pq|/(h_p h_q)
//   cross term  |a_pq|/(h_p h_q) to the two corners aligned with sign(a_pq)
//   drift       central (+-b_p/(2h_p)) where that keeps both axis rates
//               nonnegative, upwind (b_p^+/h_p, b_p^-/h_p) otherwise

#include "ergodic/error.hpp"
#include "ergodic/grid.hpp"
#include "ergodic/problem.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

namespace ergodic {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Per-node control index.
using Policy = std::vector<std::size_t>;

enum class DriftScheme {
    hybrid,   ///< central where monotone, upwind elsewhere
    upwind,   ///< always one-sided in the drift direction
    central,  ///< always centered; non-monotone nodes are an error
};

inline const char* to_string(DriftScheme s) {
    switch (s) {
        case DriftScheme::hybrid: return "hybrid";
        case DriftScheme::upwind: return "upwind";
        case DriftScheme::central: return "central";
    }
    return "?";
}

struct AssemblyOptions {
    DriftScheme scheme = DriftScheme::hybrid;
};

/// Sparse Markov generator with the grid it lives on (null for abstract chains).
struct GeneratorMatrix {
    SparseMatrix matrix;
    std::shared_ptr<const Grid> grid;
    std::string tag;

    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(matrix.rows()); }
};

inline GeneratorMatrix make_generator(const Matrix& dense, std::string tag = "dense") {
    if (dense.rows() != dense.cols()) throw ArgumentError("make_generator: matrix not square");
    return {dense.sparseView(0.0, 0.0), nullptr, std::move(tag)};
}

namespace detail {

struct Rate {
    std::size_t col;
    double value;
};

/// Off-diagonal rates of one generator row, sorted by column, zeros removed.
inline std::vector<Rate> row_rates(const ControlProblem& problem, const Grid& grid,
                                   std::size_t node, std::size_t control,
                                   const AssemblyOptions& opts) {
    const int m = grid.dim();
    const auto idx = grid.multi_index(node);
    const Vector x = grid.point(node);
    const auto coef = eval_coefficients(problem, x, control);
    const Matrix& a = coef.a;
    const Vector& b = coef.b;

    std::vector<Rate> rates;
    auto push = [&](std::vector<int> target, double v) {
        if (v == 0.0) return;
        for (int ax = 0; ax < m; ++ax)
            if (target[ax] < 0 || target[ax] >= grid.n_per_axis(ax)) return;  // reflecting
        rates.push_back({grid.flat_index(target), v});
    };

    for (int p = 0; p < m; ++p) {
        const double hp = grid.spacing(p);
        double margin = a(p, p) / hp;
        for (int q = 0; q < m; ++q)
            if (q != p) margin -= std::abs(a(p, q)) / grid.spacing(q);
        if (margin < 0.0) {
            std::ostringstream px;
            px << x.transpose();
            throw PreconditionError(fmt::format(
                "assemble_generator: diagonal dominance violated at node {} (x = [{}]), "
                "control {}, axis {}: a_pp/h_p - sum |a_pq|/h_q = {:.6g} < 0",
                node, px.str(), control, p, margin));
        }
        const double diffusion = margin / hp;
        const double half_drift = std::abs(b[p]) / (2.0 * hp);
        bool use_central = false;
        switch (opts.scheme) {
            case DriftScheme::upwind: use_central = false; break;
            case DriftScheme::hybrid: use_central = diffusion >= half_drift; break;
            case DriftScheme::central:
                if (diffusion < half_drift) {
                    std::ostringstream px;
                    px << x.transpose();
                    throw PreconditionError(fmt::format(
                        "assemble_generator: central drift not monotone at node {} "
                        "(x = [{}]), control {}, axis {}: margin {:.6g} < 0",
                        node, px.str(), control, p, diffusion - half_drift));
                }
                use_central = true;
                break;
        }
        double plus = 0.0;
        double minus = 0.0;
        if (use_central) {
            plus = diffusion + b[p] / (2.0 * hp);
            minus = diffusion - b[p] / (2.0 * hp);
        } else {
            plus = diffusion + std::max(b[p], 0.0) / hp;
            minus = diffusion + std::max(-b[p], 0.0) / hp;
        }
        auto up = idx;
        up[p] += 1;
        push(up, plus);
        auto down = idx;
        down[p] -= 1;
        push(down, minus);
    }

    for (int p = 0; p < m; ++p) {
        for (int q = p + 1; q < m; ++q) {
            const double apq = a(p, q);
            if (apq == 0.0) continue;
            const double v = std::abs(apq) / (grid.spacing(p) * grid.spacing(q));
            const int sq = apq > 0.0 ? 1 : -1;
            auto c1 = idx;
            c1[p] += 1;
            c1[q] += sq;
            push(c1, v);
            auto c2 = idx;
            c2[p] -= 1;
            c2[q] -= sq;
            push(c2, v);
        }
    }

    std::sort(rates.begin(), rates.end(),
              [](const Rate& l, const Rate& r) { return l.col < r.col; });
    return rates;
}

inline void append_row(std::vector<Eigen::Triplet<double>>& trips, std::size_t row,
                       const std::vector<Rate>& rates) {
    double out = 0.0;
    for (const auto& r : rates) out += r.value;
    bool diag_done = false;
    for (const auto& r : rates) {
        if (!diag_done && r.col > row) {
            trips.emplace_back(static_cast<int>(row), static_cast<int>(row), -out);
            diag_done = true;
        }
        trips.emplace_back(static_cast<int>(row), static_cast<int>(r.col), r.value);
    }
    if (!diag_done) trips.emplace_back(static_cast<int>(row), static_cast<int>(row), -out);
}

inline void check_policy(const Policy& policy, std::size_t nodes, std::size_t controls) {
    if (policy.size() != nodes)
        throw ArgumentError(fmt::format("policy has length {}, expected {}", policy.size(), nodes));
    for (std::size_t i = 0; i < policy.size(); ++i)
        if (policy[i] >= controls)
            throw ArgumentError(fmt::format("policy[{}] = {} is not a control index (< {})", i,
                                            policy[i], controls));
}

}  // namespace detail

/// Generator of L_alpha for the feedback policy alpha(x_i) = controls[policy[i]].
inline GeneratorMatrix assemble_generator(const ControlProblem& problem, const Grid& grid,
                                          const Policy& policy, const AssemblyOptions& opts = {}) {
    if (grid.dim() != problem.dim)
        throw ArgumentError("assemble_generator: grid and problem dimensions differ");
    const std::size_t n = grid.size();
    detail::check_policy(policy, n, problem.controls.size());
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(n * (1 + 2 * static_cast<std::size_t>(grid.dim() * grid.dim())));
    for (std::size_t i = 0; i < n; ++i)
        detail::append_row(trips, i, detail::row_rates(problem, grid, i, policy[i], opts));
    GeneratorMatrix g;
    g.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    g.matrix.setFromTriplets(trips.begin(), trips.end());
    g.grid = std::make_shared<const Grid>(grid);
    g.tag = problem.name + ":policy";
    return g;
}

/// One generator per control index (constant policies).
inline std::vector<GeneratorMatrix> assemble_control_generators(const ControlProblem& problem,
                                                                const Grid& grid,
                                                                const AssemblyOptions& opts = {}) {
    std::vector<GeneratorMatrix> out;
    out.reserve(problem.controls.size());
    for (std::size_t k = 0; k < problem.controls.size(); ++k) {
        auto g = assemble_generator(problem, grid, Policy(grid.size(), k), opts);
        g.tag = problem.name + ":control" + std::to_string(k);
        out.push_back(std::move(g));
    }
    return out;
}

struct MarkovDiagnostics {
    double max_abs_row_sum = 0.0;
    double min_off_diagonal = std::numeric_limits<double>::infinity();
    double max_diagonal = -std::numeric_limits<double>::infinity();
    bool irreducible = false;

    [[nodiscard]] bool is_generator(double row_tol = 1e-12) const {
        return max_abs_row_sum <= row_tol && min_off_diagonal >= 0.0 && max_diagonal <= 0.0;
    }
};

namespace detail {

inline bool reaches_all(const std::vector<std::vector<std::size_t>>& adj) {
    const std::size_t n = adj.size();
    if (n == 0) return true;
    std::vector<char> seen(n, 0);
    std::deque<std::size_t> queue{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!queue.empty()) {
        const auto v = queue.front();
        queue.pop_front();
        for (auto w : adj[v])
            if (!seen[w]) {
                seen[w] = 1;
                ++count;
                queue.push_back(w);
            }
    }
    return count == n;
}

}  // namespace detail

/// Row-sum deviation, sign pattern, and strong connectivity of the rate graph.
inline MarkovDiagnostics check_markov_generator(const GeneratorMatrix& g) {
    MarkovDiagnostics d;
    const auto n = static_cast<std::size_t>(g.matrix.rows());
    std::vector<std::vector<std::size_t>> fwd(n), bwd(n);
    for (Eigen::Index r = 0; r < g.matrix.outerSize(); ++r) {
        double sum = 0.0;
        double diag = 0.0;
        for (SparseMatrix::InnerIterator it(g.matrix, r); it; ++it) {
            sum += it.value();
            const auto c = static_cast<std::size_t>(it.col());
            if (it.col() == r) {
                diag = it.value();
            } else {
                d.min_off_diagonal = std::min(d.min_off_diagonal, it.value());
                if (it.value() > 0.0) {
                    fwd[static_cast<std::size_t>(r)].push_back(c);
                    bwd[c].push_back(static_cast<std::size_t>(r));
                }
            }
        }
        d.max_abs_row_sum = std::max(d.max_abs_row_sum, std::abs(sum));
        d.max_diagonal = std::max(d.max_diagonal, diag);
    }
    d.irreducible = detail::reaches_all(fwd) && detail::reaches_all(bwd);
    return d;
}

/// "row col value" per line, row-major, 17 significant digits.
inline void write_triplets(std::ostream& os, const GeneratorMatrix& g) {
    for (Eigen::Index r = 0; r < g.matrix.outerSize(); ++r)
        for (SparseMatrix::InnerIterator it(g.matrix, r); it; ++it)
            os << fmt::format("{} {} {:.17g}\n", it.row(), it.col(), it.value());
}

// ---------------------------------------------------------------------------

/// Everything the solvers need from a discretized problem: one generator per
/// control and the cost table cost(i, k) = f(x_i, alpha_k).
struct DiscreteModel {
    std::shared_ptr<const Grid> grid;  // null for abstract chains
    std::vector<GeneratorMatrix> generators;
    Matrix cost;
    std::string name;

    [[nodiscard]] std::size_t nodes() const { return static_cast<std::size_t>(cost.rows()); }
    [[nodiscard]] std::size_t controls() const { return generators.size(); }

    [[nodiscard]] std::size_t default_anchor() const {
        return grid ? grid->center_index() : 0;
    }

    /// Rows of the per-control generators selected by the policy.
    [[nodiscard]] GeneratorMatrix policy_generator(const Policy& policy) const {
        detail::check_policy(policy, nodes(), controls());
        const auto n = static_cast<Eigen::Index>(nodes());
        std::vector<Eigen::Triplet<double>> trips;
        for (Eigen::Index r = 0; r < n; ++r) {
            const auto& gm = generators[policy[static_cast<std::size_t>(r)]].matrix;
            for (SparseMatrix::InnerIterator it(gm, r); it; ++it)
                trips.emplace_back(static_cast<int>(r), static_cast<int>(it.col()), it.value());
        }
        GeneratorMatrix g;
        g.matrix.resize(n, n);
        g.matrix.setFromTriplets(trips.begin(), trips.end());
        g.grid = grid;
        g.tag = name + ":policy";
        return g;
    }

    [[nodiscard]] Vector policy_cost(const Policy& policy) const {
        detail::check_policy(policy, nodes(), controls());
        Vector f(static_cast<Eigen::Index>(nodes()));
        for (std::size_t i = 0; i < nodes(); ++i)
            f[static_cast<Eigen::Index>(i)] =
                cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(policy[i]));
        return f;
    }
};

inline DiscreteModel discretize(const ControlProblem& problem, const Grid& grid,
                                const AssemblyOptions& opts = {}) {
    DiscreteModel model;
    model.name = problem.name;
    model.grid = std::make_shared<const Grid>(grid);
    model.generators = assemble_control_generators(problem, grid, opts);
    for (auto& g : model.generators) g.grid = model.grid;
    const auto n = static_cast<Eigen::Index>(grid.size());
    const auto k = static_cast<Eigen::Index>(problem.controls.size());
    model.cost.resize(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vector x = grid.point(static_cast<std::size_t>(i));
        for (Eigen::Index c = 0; c < k; ++c)
            model.cost(i, c) = problem.f(x, problem.controls[static_cast<std::size_t>(c)]);
    }
    return model;
}

/// Model over an abstract finite chain: generators[k] is the rate matrix of
/// control k and cost(i, k) its running cost.
inline DiscreteModel make_model(const std::vector<Matrix>& generators, Matrix cost,
                                std::string name = "chain") {
    if (generators.empty()) throw ArgumentError("make_model: no generators");
    if (cost.cols() != static_cast<Eigen::Index>(generators.size()))
        throw ArgumentError("make_model: cost table needs one column per control");
    DiscreteModel model;
    model.name = std::move(name);
    for (std::size_t k = 0; k < generators.size(); ++k) {
        if (generators[k].rows() != cost.rows() || generators[k].cols() != cost.rows())
            throw ArgumentError("make_model: generator size does not match cost table");
        model.generators.push_back(make_generator(generators[k], model.name + ":control" +
                                                                     std::to_string(k)));
    }
    model.cost = std::move(cost);
    return model;
}

}  // namespace ergodic
