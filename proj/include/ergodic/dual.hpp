#pragma once

// Dual side: maximize c over (c, u) subject to c <= -(G_k u)_i + f(x_i, k)
// for every node and control, i.e. c - H(u) <= 0 pointwise.
//
// The LP is solved through its standard-form partner over occupation
// measures q(i, k) >= 0:
//     minimize   sum f(i,k) q(i,k)
//     subject to sum_{i,k} q(i,k) G_k(i, j) = 0   (j != anchor)
//                sum_{i,k} q(i,k) = 1
// whose simplex multipliers are exactly (u_j, c), with u[anchor] = 0.

#include "ergodic/error.hpp"
#include "ergodic/generator.hpp"
#include "ergodic/primal.hpp"
#include "ergodic/simplex.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

namespace ergodic {

/// r_i = min_k {-(G_k u)_i + f(x_i, alpha_k)} - c.
inline Vector hjb_residual(const DiscreteModel& model, double c, const Vector& u) {
    const Matrix q = hamiltonian_table(model, u);
    return (q.rowwise().minCoeff().array() - c).matrix();
}

struct DualSolution {
    double c = 0.0;
    Vector u;
    std::vector<std::pair<std::size_t, std::size_t>> active_set;  // (node, control)
    double min_slack = 0.0;  // min over (i,k) of f - c - G_k u; >= 0 when feasible
    double primal_objective = 0.0;
    int pivots = 0;
};

inline constexpr std::size_t kMaxLpConstraints = 5000;

/// Largest feasible ergodic constant of the discrete dual LP, by the dense
/// revised simplex. Restricted to N * |A| <= 5000.
inline DualSolution lp_dual_solve(const DiscreteModel& model, std::size_t anchor,
                                  double active_tol = 1e-9) {
    const std::size_t n = model.nodes();
    const std::size_t k = model.controls();
    if (n * k > kMaxLpConstraints)
        throw ArgumentError(fmt::format(
            "lp_dual_solve: N * |A| = {} exceeds the oracle bound {}; use policy_iteration",
            n * k, kMaxLpConstraints));
    if (anchor >= n) throw ArgumentError("lp_dual_solve: anchor out of range");

    const auto rows = static_cast<Eigen::Index>(n);
    // row index of balance constraint j, skipping the anchor
    auto row_of = [anchor](std::size_t j) {
        return static_cast<Eigen::Index>(j < anchor ? j : j - 1);
    };
    // Controls with identical generator rows at a node give identical columns;
    // only the cheapest can carry mass, and exact twins make phase one pivot
    // between them on rounding noise. Keep one column per distinct row.
    auto same_row = [](const SparseMatrix& g1, const SparseMatrix& g2, Eigen::Index i) {
        SparseMatrix::InnerIterator a(g1, i), b(g2, i);
        for (; a && b; ++a, ++b)
            if (a.col() != b.col() || a.value() != b.value()) return false;
        return !a && !b;
    };
    std::vector<std::pair<std::size_t, std::size_t>> kept;  // (node, control)
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const std::size_t first = kept.size();
        for (std::size_t c = 0; c < k; ++c) {
            const double fc = model.cost(ii, static_cast<Eigen::Index>(c));
            bool merged = false;
            for (std::size_t j = first; j < kept.size(); ++j) {
                const std::size_t d = kept[j].second;
                if (!same_row(model.generators[c].matrix, model.generators[d].matrix, ii)) continue;
                if (fc < model.cost(ii, static_cast<Eigen::Index>(d))) kept[j].second = c;
                merged = true;
                break;
            }
            if (!merged) kept.emplace_back(i, c);
        }
    }

    const auto cols = static_cast<Eigen::Index>(kept.size());
    Matrix a = Matrix::Zero(rows, cols);
    Vector cost(cols);
    for (Eigen::Index col = 0; col < cols; ++col) {
        const auto [i, c] = kept[static_cast<std::size_t>(col)];
        const auto ii = static_cast<Eigen::Index>(i);
        for (SparseMatrix::InnerIterator it(model.generators[c].matrix, ii); it; ++it) {
            const auto j = static_cast<std::size_t>(it.col());
            if (j != anchor) a(row_of(j), col) = it.value();
        }
        a(rows - 1, col) = 1.0;
        cost[col] = model.cost(ii, static_cast<Eigen::Index>(c));
    }
    Vector b = Vector::Zero(rows);
    b[rows - 1] = 1.0;

    const auto lp = solve_lp(a, b, cost);
    if (lp.status == LpStatus::infeasible)
        throw NumericalError(
            "lp_dual_solve: measure LP infeasible, dual unbounded (reducible generator or "
            "assembly bug)");
    if (lp.status != LpStatus::optimal)
        throw NumericalError(std::string("lp_dual_solve: simplex stopped with status ") +
                             to_string(lp.status));

    DualSolution sol;
    sol.c = lp.y[rows - 1];
    sol.u = Vector::Zero(rows);
    for (std::size_t j = 0; j < n; ++j)
        if (j != anchor) sol.u[static_cast<Eigen::Index>(j)] = lp.y[row_of(j)];
    sol.primal_objective = lp.objective;
    sol.pivots = lp.pivots;

    const Matrix q = hamiltonian_table(model, sol.u);
    const Matrix slack = (q.array() - sol.c).matrix();
    sol.min_slack = slack.minCoeff();
    const double tol = active_tol * (1.0 + model.cost.cwiseAbs().maxCoeff());
    for (std::size_t i = 0; i < n; ++i) {
        bool any = false;
        for (std::size_t c = 0; c < k; ++c)
            if (slack(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) <= tol) {
                sol.active_set.emplace_back(i, c);
                any = true;
            }
        if (!any)
            throw NumericalError(fmt::format(
                "lp_dual_solve: node {} has no active constraint; the dual optimum is not tight",
                i));
    }
    return sol;
}

struct OptimalityTolerances {
    double gap = 1e-8;
    double slackness = 1e-8;
    double feasibility = 1e-8;
    double equality = 1e-8;
    double objective = 1e-10;
};

struct OptimalityReport {
    double c_primal = 0.0;
    double c_dual = 0.0;                  // LP value, or the certified lower bound c + min r
    std::string gap_method;               // "lp" or "residual_bound"
    double duality_gap = 0.0;
    double complementary_slackness = 0.0; // |mu^T G_{alpha*} u|
    double slackness_bound = 0.0;         // ||u||_inf ||G^T mu||_1
    double dual_feasibility = 0.0;        // sup of the negative part of r
    double primal_dual_equality = 0.0;    // sup |r_i| over the support of mu
    double weighted_equality = 0.0;       // sum mu_i |r_i|
    double objective_consistency = 0.0;   // |c - <f_{alpha*}, mu>|
    bool gap_pass = false;
    bool slackness_pass = false;
    bool feasibility_pass = false;
    bool equality_pass = false;
    bool objective_pass = false;

    [[nodiscard]] bool pass() const {
        return gap_pass && slackness_pass && feasibility_pass && equality_pass && objective_pass;
    }
};

/// Checks the discrete optimality conditions of a primal solution: no duality
/// gap, complementary slackness from G^T mu = 0, dual feasibility of (c, u),
/// and H(u) = c on the support of mu.
inline OptimalityReport optimality_report(const DiscreteModel& model, const ErgodicSolution& sol,
                                          const OptimalityTolerances& tol = {}) {
    OptimalityReport rep;
    rep.c_primal = sol.c;
    const auto g = model.policy_generator(sol.policy);
    const Vector& mu = sol.mu.weights;

    const Vector r = hjb_residual(model, sol.c, sol.u);
    rep.dual_feasibility = std::max(0.0, -r.minCoeff());
    double sup = 0.0;
    double weighted = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        if (mu[i] > 0.0) sup = std::max(sup, std::abs(r[i]));
        weighted += mu[i] * std::abs(r[i]);
    }
    rep.primal_dual_equality = sup;
    rep.weighted_equality = weighted;

    rep.complementary_slackness = std::abs(mu.dot(g.matrix * sol.u));
    rep.slackness_bound =
        sol.u.cwiseAbs().maxCoeff() * (g.matrix.transpose() * mu).cwiseAbs().sum();
    rep.objective_consistency = std::abs(sol.c - model.policy_cost(sol.policy).dot(mu));

    if (model.nodes() * model.controls() <= kMaxLpConstraints) {
        const auto dual = lp_dual_solve(model, sol.anchor_index);
        rep.gap_method = "lp";
        rep.c_dual = dual.c;
        rep.duality_gap = std::abs(sol.c - dual.c);
    } else {
        // (c + min r, u) is dual feasible, so the optimum lies in [c + min r, c]
        rep.gap_method = "residual_bound";
        rep.c_dual = sol.c + std::min(0.0, r.minCoeff());
        rep.duality_gap = sol.c - rep.c_dual;
    }

    rep.gap_pass = rep.duality_gap <= tol.gap;
    rep.slackness_pass = rep.complementary_slackness <= tol.slackness;
    rep.feasibility_pass = rep.dual_feasibility <= tol.feasibility;
    rep.equality_pass = rep.primal_dual_equality <= tol.equality;
    rep.objective_pass =
        rep.objective_consistency <= tol.objective * (1.0 + std::abs(sol.c));
    return rep;
}

struct MaximalityReport {
    int trials = 0;
    int violations = 0;
    double c = 0.0;
    double max_c_tilde = -std::numeric_limits<double>::infinity();
    std::vector<double> c_tilde;

    [[nodiscard]] bool pass() const { return violations == 0; }
};

/// Largest constant a candidate u~ certifies as a subsolution: min_i H(u~)_i.
inline double subsolution_constant(const DiscreteModel& model, const Vector& u) {
    return hamiltonian_table(model, u).rowwise().minCoeff().minCoeff();
}

/// Draws n_trials random smooth bump functions u~ and checks that none of
/// them certifies a constant above c: c~ = min_i H(u~)_i <= c + margin.
inline MaximalityReport maximality_check(const DiscreteModel& model, double c, int n_trials,
                                         std::uint64_t seed, double margin = 1e-10) {
    MaximalityReport rep;
    rep.c = c;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto n = static_cast<Eigen::Index>(model.nodes());

    for (int t = 0; t < n_trials; ++t) {
        Vector u = Vector::Zero(n);
        const int bumps = 1 + static_cast<int>(unif(rng) * 4.0);
        if (model.grid) {
            const Grid& grid = *model.grid;
            const double radius = grid.radius();
            for (int j = 0; j < bumps; ++j) {
                const double amp = 10.0 * unif(rng) - 5.0;
                const double width = radius * (0.1 + 0.9 * unif(rng));
                Vector center(grid.dim());
                for (int ax = 0; ax < grid.dim(); ++ax) center[ax] = radius * (2.0 * unif(rng) - 1.0);
                for (Eigen::Index i = 0; i < n; ++i) {
                    const double d2 = (grid.point(static_cast<std::size_t>(i)) - center).squaredNorm();
                    u[i] += amp * std::exp(-d2 / (2.0 * width * width));
                }
            }
        } else {
            for (Eigen::Index i = 0; i < n; ++i) u[i] = 10.0 * unif(rng) - 5.0;
        }
        const double ct = subsolution_constant(model, u);
        rep.c_tilde.push_back(ct);
        rep.max_c_tilde = std::max(rep.max_c_tilde, ct);
        if (ct > c + margin) ++rep.violations;
        ++rep.trials;
    }
    return rep;
}

}  // namespace ergodic
