#pragma once

// Primal side: F(alpha) = <f(., alpha(.)), mu_alpha> over feedback policies,
// the ergodic Poisson equation for the corrector, policy improvement by
// pointwise argmin, and brute-force enumeration of deterministic policies.

#include "ergodic/error.hpp"
#include "ergodic/fpk.hpp"
#include "ergodic/generator.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

namespace ergodic {

struct ErgodicSolution {
    double c = 0.0;
    Vector u;
    Policy policy;
    InvariantMeasure mu;
    std::size_t anchor_index = 0;
    int iterations = 0;
    std::vector<double> history;  // F(alpha_k) per evaluation, nonincreasing
    bool converged_by_fixpoint = false;
    double poisson_residual = 0.0;  // ||G u + f - c||_inf
    double hjb_residual_sup = 0.0;  // max_i |min_k Q(i,k) - c|
};

struct Objective {
    double c = 0.0;
    InvariantMeasure mu;
};

/// F(policy) = sum_i f(x_i, policy_i) mu_i with mu the invariant measure.
inline Objective objective(const DiscreteModel& model, const Policy& policy,
                           double tol = 1e-10) {
    Objective out;
    out.mu = stationary_measure(model.policy_generator(policy), tol);
    out.c = model.policy_cost(policy).dot(out.mu.weights);
    return out;
}

inline Objective objective(const ControlProblem& problem, const Grid& grid, const Policy& policy,
                           const AssemblyOptions& opts = {}, double tol = 1e-10) {
    const auto g = assemble_generator(problem, grid, policy, opts);
    Objective out;
    out.mu = stationary_measure(g, tol);
    Vector f(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t i = 0; i < grid.size(); ++i)
        f[static_cast<Eigen::Index>(i)] = eval_coefficients(problem, grid.point(i), policy[i]).f;
    out.c = f.dot(out.mu.weights);
    return out;
}

struct PoissonSolution {
    Vector u;
    double residual = 0.0;  // ||G u + f - c||_inf over all rows
};

/// Solves -G u + f = c with u[anchor] = 0 through the bordered system
///     [G 1; e_anchor^T 0] [u; d] = [f - c; 0].
/// The scalar d takes up the rounding-level incompatibility mu^T (f - c)
/// uniformly, so solutions for different anchors differ by a constant. With
/// the anchor row replaced instead, that defect lands on the anchor row and
/// spreads as 1/mu_anchor, which is large for anchors in the tails.
/// The right-hand side must satisfy sum_i (f_i - c) mu_i ~ 0.
inline PoissonSolution solve_poisson(const GeneratorMatrix& g, const Vector& f, double c,
                                     const InvariantMeasure& mu, std::size_t anchor,
                                     double compat_tol = 1e-9) {
    const auto n = static_cast<Eigen::Index>(g.size());
    if (f.size() != n || mu.weights.size() != n)
        throw ArgumentError("solve_poisson: size mismatch");
    if (anchor >= g.size()) throw ArgumentError("solve_poisson: anchor out of range");
    const double compat = (f.array() - c).matrix().dot(mu.weights);
    const double scale = 1.0 + f.cwiseAbs().maxCoeff();
    if (std::abs(compat) > compat_tol * scale)
        throw PreconditionError(fmt::format(
            "solve_poisson: compatibility sum (f - c) mu = {:.3e} exceeds {:.3e}; "
            "c and mu are inconsistent",
            compat, compat_tol * scale));

    const auto ia = static_cast<Eigen::Index>(anchor);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(g.matrix.nonZeros() + 2 * n + 1));
    for (Eigen::Index r = 0; r < g.matrix.outerSize(); ++r) {
        for (SparseMatrix::InnerIterator it(g.matrix, r); it; ++it)
            trips.emplace_back(static_cast<int>(r), static_cast<int>(it.col()), it.value());
        trips.emplace_back(static_cast<int>(r), static_cast<int>(n), 1.0);
    }
    trips.emplace_back(static_cast<int>(n), static_cast<int>(ia), 1.0);
    detail::ColSparse a(n + 1, n + 1);
    a.setFromTriplets(trips.begin(), trips.end());

    Vector rhs(n + 1);
    rhs.head(n) = (f.array() - c).matrix();
    rhs[n] = 0.0;
    detail::RefinedSolver solver(a);
    const Vector x = solver.solve(rhs);
    PoissonSolution sol;
    sol.u = x.head(n);
    sol.u[ia] = 0.0;
    sol.residual = (g.matrix * sol.u - (f.array() - c).matrix()).cwiseAbs().maxCoeff();
    return sol;
}

/// Q(i, k) = -(G_k u)_i + f(x_i, alpha_k): the pointwise Hamiltonian table.
inline Matrix hamiltonian_table(const DiscreteModel& model, const Vector& u) {
    if (u.size() != static_cast<Eigen::Index>(model.nodes()))
        throw ArgumentError("hamiltonian_table: u has wrong length");
    Matrix q = model.cost;
    for (std::size_t k = 0; k < model.controls(); ++k)
        q.col(static_cast<Eigen::Index>(k)) -= model.generators[k].matrix * u;
    return q;
}

/// Per-node argmin of Q(i, .), lowest index among exact ties. When `current`
/// is given, a node keeps its control unless another one is better by more
/// than tie_tol.
inline Policy improve_policy(const DiscreteModel& model, const Vector& u,
                             const Policy* current = nullptr, double tie_tol = 0.0) {
    const Matrix q = hamiltonian_table(model, u);
    Policy p(model.nodes());
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index k = 1; k < q.cols(); ++k)
            if (q(i, k) < q(i, best)) best = k;
        if (current) {
            const auto keep = static_cast<Eigen::Index>((*current)[static_cast<std::size_t>(i)]);
            if (q(i, keep) <= q(i, best) + tie_tol) best = keep;
        }
        p[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
    }
    return p;
}

struct PolicyIterationOptions {
    std::optional<std::size_t> anchor;  // default: grid center (node 0 without a grid)
    double tol = 1e-10;                 // |c_{k+1} - c_k| stopping threshold
    int max_iter = 200;
    std::optional<Policy> initial;      // default: control 0 everywhere
    double measure_tol = 1e-10;
    double tie_tol = 1e-12;             // relative to 1 + max|f|
};

class PolicyIterationError : public ConvergenceError {
public:
    PolicyIterationError(const std::string& what, ErgodicSolution best)
        : ConvergenceError(what), best_(std::move(best)) {}
    [[nodiscard]] const ErgodicSolution& best() const { return best_; }

private:
    ErgodicSolution best_;
};

/// Howard policy iteration for the average-cost problem on the discrete model.
/// Each step evaluates mu and c = <f, mu> for the current policy, solves the
/// Poisson equation for u, and improves pointwise. Stops at a policy fixpoint
/// or when |c_{k+1} - c_k| <= tol, whichever comes first.
inline ErgodicSolution policy_iteration(const DiscreteModel& model,
                                        const PolicyIterationOptions& opts = {}) {
    const std::size_t n = model.nodes();
    ErgodicSolution sol;
    sol.anchor_index = opts.anchor.value_or(model.default_anchor());
    if (sol.anchor_index >= n) throw ArgumentError("policy_iteration: anchor out of range");
    Policy policy = opts.initial.value_or(Policy(n, 0));
    detail::check_policy(policy, n, model.controls());
    const double tie = opts.tie_tol * (1.0 + model.cost.cwiseAbs().maxCoeff());

    for (int it = 1; it <= opts.max_iter; ++it) {
        const auto g = model.policy_generator(policy);
        const Vector f = model.policy_cost(policy);
        auto mu = stationary_measure(g, opts.measure_tol);
        const double c = f.dot(mu.weights);
        auto ps = solve_poisson(g, f, c, mu, sol.anchor_index);

        const bool stalled = !sol.history.empty() && std::abs(c - sol.history.back()) <= opts.tol;
        sol.history.push_back(c);
        sol.c = c;
        sol.u = std::move(ps.u);
        sol.poisson_residual = ps.residual;
        sol.mu = std::move(mu);
        sol.policy = policy;
        sol.iterations = it;

        Policy next = improve_policy(model, sol.u, &policy, tie);
        if (next == policy || stalled) {
            sol.converged_by_fixpoint = next == policy;
            const Matrix q = hamiltonian_table(model, sol.u);
            sol.hjb_residual_sup = (q.rowwise().minCoeff().array() - c).abs().maxCoeff();
            return sol;
        }
        policy = std::move(next);
    }
    throw PolicyIterationError(
        fmt::format("policy_iteration: no fixpoint after {} iterations (last c = {:.17g})",
                    opts.max_iter, sol.c),
        sol);
}

struct OracleResult {
    double c_min = std::numeric_limits<double>::infinity();
    Policy best_policy;
    std::uint64_t evaluated = 0;
};

inline constexpr double kMaxEnumeratedPolicies = 1e6;

/// Exact discrete minimum of F over all |A|^N deterministic policies.
/// Each policy is evaluated through the dense system (G^T + 1 1^T) mu = 1,
/// independent of the bordered sparse path used by stationary_measure.
/// Ties keep the lexicographically first policy.
inline OracleResult enumerate_policies_oracle(const DiscreteModel& model) {
    const std::size_t n = model.nodes();
    const std::size_t k = model.controls();
    const double count = std::pow(static_cast<double>(k), static_cast<double>(n));
    if (count > kMaxEnumeratedPolicies)
        throw ArgumentError(fmt::format(
            "enumerate_policies_oracle: |A|^N = {}^{} = {:.3g} exceeds the bound {:.0g}", k, n,
            count, kMaxEnumeratedPolicies));

    std::vector<Matrix> dense;
    dense.reserve(k);
    for (const auto& g : model.generators) dense.emplace_back(Matrix(g.matrix));

    const auto ni = static_cast<Eigen::Index>(n);
    OracleResult best;
    Policy p(n, 0);
    Matrix gt(ni, ni);
    Vector f(ni);
    const Vector ones = Vector::Ones(ni);
    while (true) {
        for (Eigen::Index i = 0; i < ni; ++i) {
            const auto ctrl = p[static_cast<std::size_t>(i)];
            gt.col(i) = dense[ctrl].row(i).transpose();
            f[i] = model.cost(i, static_cast<Eigen::Index>(ctrl));
        }
        const Matrix sys = gt + ones * ones.transpose();
        const Vector mu = sys.partialPivLu().solve(ones);
        const double res = (gt * mu).cwiseAbs().maxCoeff();
        if (!(res <= 1e-8) || !mu.allFinite())
            throw NumericalError(fmt::format(
                "enumerate_policies_oracle: policy #{} has no unique invariant measure "
                "(residual {:.3e})",
                best.evaluated, res));
        const double c = f.dot(mu);
        ++best.evaluated;
        if (c < best.c_min) {
            best.c_min = c;
            best.best_policy = p;
        }
        // odometer with node 0 most significant: lexicographic order
        std::size_t pos = n;
        while (pos > 0) {
            --pos;
            if (++p[pos] < k) break;
            p[pos] = 0;
            if (pos == 0) return best;
        }
    }
}

// ---------------------------------------------------------------------------
// Exchange property, discrete form
// ---------------------------------------------------------------------------

/// sum_i q_i min_k table(i, k), summed in node order.
inline double pointwise_min_integral(const Matrix& table, const Vector& q) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < table.rows(); ++i) s += table.row(i).minCoeff() * q[i];
    return s;
}

/// min over all policies of sum_i q_i table(i, policy_i), by enumeration.
inline double min_over_policies_integral(const Matrix& table, const Vector& q) {
    const auto n = static_cast<std::size_t>(table.rows());
    const auto k = static_cast<std::size_t>(table.cols());
    if (std::pow(static_cast<double>(k), static_cast<double>(n)) > kMaxEnumeratedPolicies)
        throw ArgumentError("min_over_policies_integral: table too large to enumerate");
    std::vector<std::size_t> p(n, 0);
    double best = std::numeric_limits<double>::infinity();
    while (true) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            s += table(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p[i])) *
                 q[static_cast<Eigen::Index>(i)];
        best = std::min(best, s);
        std::size_t pos = n;
        bool done = true;
        while (pos > 0) {
            --pos;
            if (++p[pos] < k) {
                done = false;
                break;
            }
            p[pos] = 0;
        }
        if (done) return best;
    }
}

}  // namespace ergodic
