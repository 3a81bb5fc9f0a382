#pragma once

// Controlled-diffusion problem instances: coefficients of the generator
//   L_alpha phi = trace(a(x,alpha) D^2 phi) + b(x,alpha) . grad phi
// together with the running cost f(x,alpha) and the growth constants the
// existence and duality theory is stated with.

#include "ergodic/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace ergodic {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Finite discretization of the compact control set A.
class ControlSet {
public:
    ControlSet() = default;

    /// Throws ArgumentError when empty, when points differ in length, when a
    /// point lies outside [lo, hi], or when two points coincide.
    ControlSet(std::vector<Vector> points, Vector lo, Vector hi)
        : points_(std::move(points)), lo_(std::move(lo)), hi_(std::move(hi)) {
        if (points_.empty())
            throw ArgumentError("ControlSet: empty control set");
        const auto k = lo_.size();
        if (hi_.size() != k)
            throw ArgumentError("ControlSet: bounds have different lengths");
        for (std::size_t i = 0; i < points_.size(); ++i) {
            const auto& p = points_[i];
            if (p.size() != k)
                throw ArgumentError("ControlSet: point " + std::to_string(i) +
                                    " has wrong length");
            for (Eigen::Index j = 0; j < k; ++j)
                if (p[j] < lo_[j] || p[j] > hi_[j])
                    throw ArgumentError("ControlSet: point " + std::to_string(i) +
                                        " outside bounds");
            for (std::size_t q = 0; q < i; ++q)
                if (points_[q] == p)
                    throw ArgumentError("ControlSet: duplicate points " +
                                        std::to_string(q) + " and " + std::to_string(i));
        }
    }

    /// n equispaced scalar controls on [lo, hi] (n == 1 gives the midpoint).
    static ControlSet interval(double lo, double hi, int n) {
        if (n < 1 || !(hi >= lo))
            throw ArgumentError("ControlSet::interval: need n >= 1 and hi >= lo");
        std::vector<Vector> pts;
        pts.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            double v = n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (n - 1);
            if (i == n - 1 && n > 1) v = hi;
            pts.push_back(Vector::Constant(1, v));
        }
        return ControlSet(std::move(pts), Vector::Constant(1, lo), Vector::Constant(1, hi));
    }

    static ControlSet singleton() { return interval(0.0, 0.0, 1); }

    [[nodiscard]] std::size_t size() const { return points_.size(); }
    [[nodiscard]] const Vector& operator[](std::size_t i) const { return points_[i]; }
    [[nodiscard]] const std::vector<Vector>& points() const { return points_; }
    [[nodiscard]] const Vector& lower() const { return lo_; }
    [[nodiscard]] const Vector& upper() const { return hi_; }

private:
    std::vector<Vector> points_;
    Vector lo_;
    Vector hi_;
};

/// Constants of the standing assumptions: ellipticity [lambda_lo, lambda_hi],
/// confinement b.x <= gamma1 - gamma2 |x|^chi, cost growth
/// |f| <= K_f (1+|x|)^d and drift growth |b| <= K_b (1+|x|)^theta.
struct GrowthParams {
    double lambda_lo = 1.0;
    double lambda_hi = 1.0;
    double gamma1 = 0.0;
    double gamma2 = 1.0;
    double chi = 2.0;
    double K_f = 1.0;
    double d = 2.0;
    double K_b = 1.0;
    double theta = 1.0;

    void validate() const {
        if (!(lambda_lo > 0.0) || !(lambda_hi >= lambda_lo))
            throw ArgumentError("GrowthParams: need lambda_hi >= lambda_lo > 0");
        if (!(gamma1 >= 0.0) || !(gamma2 > 0.0) || !(chi > 0.0))
            throw ArgumentError("GrowthParams: need gamma1 >= 0, gamma2 > 0, chi > 0");
        if (!(K_f > 0.0) || !(d >= 1.0))
            throw ArgumentError("GrowthParams: need K_f > 0 and d >= 1");
        if (!(K_b > 0.0) || !(theta >= 0.0) || !(theta <= d))
            throw ArgumentError("GrowthParams: need K_b > 0 and 0 <= theta <= d");
    }
};

using DiffusionFn = std::function<Matrix(const Vector& x, const Vector& alpha)>;
using DriftFn = std::function<Vector(const Vector& x, const Vector& alpha)>;
using CostFn = std::function<double(const Vector& x, const Vector& alpha)>;

/// A controlled diffusion with running cost. Immutable once built; the
/// coefficient functions must be pure and reentrant.
struct ControlProblem {
    std::string name;
    int dim = 1;
    ControlSet controls;
    DiffusionFn a;
    DriftFn b;
    CostFn f;
    GrowthParams growth;
};

struct Coefficients {
    Matrix a;
    Vector b;
    double f = 0.0;
};

/// (a, b, f) at x for control `alpha_index`. The diffusion matrix is
/// symmetrized so that a(i,j) == a(j,i) holds bitwise.
inline Coefficients eval_coefficients(const ControlProblem& problem, const Vector& x,
                                      std::size_t alpha_index) {
    if (alpha_index >= problem.controls.size())
        throw ArgumentError("eval_coefficients: control index " +
                            std::to_string(alpha_index) + " out of range [0, " +
                            std::to_string(problem.controls.size()) + ")");
    if (x.size() != problem.dim)
        throw ArgumentError("eval_coefficients: point has wrong dimension");
    const Vector& alpha = problem.controls[alpha_index];
    Coefficients c;
    Matrix raw = problem.a(x, alpha);
    c.a = Matrix(problem.dim, problem.dim);
    for (int i = 0; i < problem.dim; ++i)
        for (int j = 0; j < problem.dim; ++j)
            c.a(i, j) = 0.5 * (raw(i, j) + raw(j, i));
    c.b = problem.b(x, alpha);
    c.f = problem.f(x, alpha);
    return c;
}

// ---------------------------------------------------------------------------
// Assumption sampling
// ---------------------------------------------------------------------------

/// Worst sampled case of one inequality lhs <= rhs (margin = rhs - lhs).
struct AssumptionCheck {
    std::string name;
    bool pass = true;
    double margin = std::numeric_limits<double>::infinity();
    double lhs = 0.0;
    double rhs = 0.0;
    Vector x;
    std::size_t control = 0;
};

struct AssumptionReport {
    AssumptionCheck ellipticity;   // A3
    AssumptionCheck confinement;   // A4
    AssumptionCheck cost_growth;   // A5
    AssumptionCheck drift_growth;  // A6

    [[nodiscard]] bool all_pass() const {
        return ellipticity.pass && confinement.pass && cost_growth.pass && drift_growth.pass;
    }
    [[nodiscard]] std::vector<const AssumptionCheck*> checks() const {
        return {&ellipticity, &confinement, &cost_growth, &drift_growth};
    }
};

namespace detail {

inline bool holds(double lhs, double rhs) {
    // slack absorbs rounding when an inequality holds with equality
    return lhs <= rhs + 1e-12 * (1.0 + std::abs(lhs) + std::abs(rhs));
}

inline void record(AssumptionCheck& chk, double lhs, double rhs, const Vector& x,
                   std::size_t k) {
    const double margin = rhs - lhs;
    if (!holds(lhs, rhs)) chk.pass = false;
    if (margin < chk.margin) {
        chk.margin = margin;
        chk.lhs = lhs;
        chk.rhs = rhs;
        chk.x = x;
        chk.control = k;
    }
}

}  // namespace detail

/// Samples n_samples points uniformly in the ball of the given radius and
/// checks (A3)-(A6) against the declared GrowthParams at every control.
/// Failures are reported together with the worst witness, never thrown.
inline AssumptionReport validate_assumptions(const ControlProblem& problem, int n_samples,
                                             double radius, std::uint64_t seed) {
    if (n_samples < 1) throw ArgumentError("validate_assumptions: n_samples must be >= 1");
    if (!(radius > 0.0)) throw ArgumentError("validate_assumptions: radius must be > 0");

    AssumptionReport rep;
    rep.ellipticity.name = "A3";
    rep.confinement.name = "A4";
    rep.cost_growth.name = "A5";
    rep.drift_growth.name = "A6";

    const auto& g = problem.growth;
    const int m = problem.dim;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    auto unit_vector = [&] {
        Vector v(m);
        do {
            for (int i = 0; i < m; ++i) v[i] = normal(rng);
        } while (v.norm() == 0.0);
        return Vector(v / v.norm());
    };

    for (int s = 0; s < n_samples; ++s) {
        const Vector x = unit_vector() * (radius * std::pow(unif(rng), 1.0 / m));
        const double r = x.norm();
        double sup_bx = -std::numeric_limits<double>::infinity();
        std::size_t sup_k = 0;
        for (std::size_t k = 0; k < problem.controls.size(); ++k) {
            const Matrix raw = problem.a(x, problem.controls[k]);
            const auto c = eval_coefficients(problem, x, k);

            // an asymmetric a is an ellipticity failure in its own right
            const double asym = (raw - raw.transpose()).cwiseAbs().maxCoeff();
            if (asym > 1e-12 * (1.0 + raw.cwiseAbs().maxCoeff()))
                detail::record(rep.ellipticity, asym, 0.0, x, k);

            const Vector xi = unit_vector();
            const double q = xi.dot(c.a * xi);
            if (q - g.lambda_lo < g.lambda_hi - q)
                detail::record(rep.ellipticity, g.lambda_lo, q, x, k);
            else
                detail::record(rep.ellipticity, q, g.lambda_hi, x, k);

            const double bx = c.b.dot(x);
            if (bx > sup_bx) {
                sup_bx = bx;
                sup_k = k;
            }
            detail::record(rep.cost_growth, std::abs(c.f), g.K_f * std::pow(1.0 + r, g.d), x, k);
            detail::record(rep.drift_growth, c.b.norm(), g.K_b * std::pow(1.0 + r, g.theta), x, k);
        }
        detail::record(rep.confinement, sup_bx, g.gamma1 - g.gamma2 * std::pow(r, g.chi), x,
                       sup_k);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Benchmarks
// ---------------------------------------------------------------------------

using ParamMap = std::map<std::string, double>;

inline const std::map<std::string, std::vector<std::string>>& builtin_parameters() {
    static const std::map<std::string, std::vector<std::string>> table = {
        {"ou1d", {"kappa"}},
        {"lq1d", {"M", "n_ctrl"}},
        {"doublewell1d", {"n_ctrl"}},
        {"ou2d", {}},
    };
    return table;
}

namespace detail {

inline double param(const ParamMap& p, const std::string& key, double fallback) {
    auto it = p.find(key);
    return it == p.end() ? fallback : it->second;
}

inline int int_param(const ParamMap& p, const std::string& key, int fallback) {
    const double v = param(p, key, fallback);
    if (v != std::floor(v) || v < 1)
        throw ArgumentError("builtin_problem: parameter '" + key + "' must be a positive integer");
    return static_cast<int>(v);
}

}  // namespace detail

/// Shipped benchmark instances:
///  - ou1d:         a = 1, b = -kappa x, f = x^2, single control (kappa = 1)
///  - lq1d:         a = 1, b = alpha, f = x^2 + alpha^2, alpha on n_ctrl points of [-M, M]
///  - doublewell1d: a = 1, b = x - x^3, f = 1{x > 0} + alpha^2, alpha in [-1, 1]
///  - ou2d:         a = [[1, .25], [.25, .5]], b = -(x1, 2 x2), f = |x|^2
inline ControlProblem builtin_problem(const std::string& name, const ParamMap& params = {}) {
    const auto& table = builtin_parameters();
    auto entry = table.find(name);
    if (entry == table.end()) {
        std::string names;
        for (const auto& [k, v] : table) names += (names.empty() ? "" : ", ") + k;
        throw ArgumentError("builtin_problem: unknown problem '" + name + "' (available: " +
                            names + ")");
    }
    for (const auto& [key, value] : params) {
        const auto& allowed = entry->second;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ArgumentError("builtin_problem: problem '" + name +
                                "' has no parameter '" + key + "'");
    }

    ControlProblem p;
    p.name = name;
    auto unit_diffusion = [](const Vector& x, const Vector&) {
        return Matrix::Identity(x.size(), x.size());
    };

    if (name == "ou1d") {
        const double kappa = detail::param(params, "kappa", 1.0);
        if (!(kappa > 0.0)) throw ArgumentError("builtin_problem: ou1d needs kappa > 0");
        p.dim = 1;
        p.controls = ControlSet::singleton();
        p.a = unit_diffusion;
        p.b = [kappa](const Vector& x, const Vector&) { return Vector(-kappa * x); };
        p.f = [](const Vector& x, const Vector&) { return x[0] * x[0]; };
        p.growth = {1.0, 1.0, 0.0, kappa, 2.0, 1.0, 2.0, kappa, 1.0};
    } else if (name == "lq1d") {
        const double M = detail::param(params, "M", 4.0);
        const int n_ctrl = detail::int_param(params, "n_ctrl", 81);
        if (!(M > 0.0)) throw ArgumentError("builtin_problem: lq1d needs M > 0");
        p.dim = 1;
        p.controls = ControlSet::interval(-M, M, n_ctrl);
        p.a = unit_diffusion;
        p.b = [](const Vector&, const Vector& alpha) { return Vector(alpha); };
        p.f = [](const Vector& x, const Vector& alpha) {
            return x[0] * x[0] + alpha[0] * alpha[0];
        };
        // b.x = alpha x is not confining for every alpha: A4 cannot hold and
        // is reported as failing
        p.growth = {1.0, 1.0, 1.0, 1.0, 2.0, 1.0 + M * M, 2.0, M, 0.0};
    } else if (name == "doublewell1d") {
        const int n_ctrl = detail::int_param(params, "n_ctrl", 21);
        p.dim = 1;
        p.controls = ControlSet::interval(-1.0, 1.0, n_ctrl);
        p.a = unit_diffusion;
        p.b = [](const Vector& x, const Vector&) {
            return Vector::Constant(1, x[0] - x[0] * x[0] * x[0]);
        };
        p.f = [](const Vector& x, const Vector& alpha) {
            return (x[0] > 0.0 ? 1.0 : 0.0) + alpha[0] * alpha[0];
        };
        p.growth = {1.0, 1.0, 1.0, 0.5, 4.0, 2.0, 3.0, 1.0, 3.0};
    } else {  // ou2d
        p.dim = 2;
        p.controls = ControlSet::singleton();
        p.a = [](const Vector&, const Vector&) {
            Matrix a(2, 2);
            a << 1.0, 0.25, 0.25, 0.5;
            return a;
        };
        p.b = [](const Vector& x, const Vector&) {
            Vector b(2);
            b << -x[0], -2.0 * x[1];
            return b;
        };
        p.f = [](const Vector& x, const Vector&) { return x.squaredNorm(); };
        p.growth = {0.35, 1.15, 0.0, 1.0, 2.0, 1.0, 2.0, 2.0, 1.0};
    }
    p.growth.validate();
    return p;
}

/// Copy of `base` with drift b + eps * perturbation(x). Used by perturbation studies.
inline ControlProblem perturb_drift(const ControlProblem& base,
                                    std::function<Vector(const Vector&)> perturbation,
                                    double eps) {
    ControlProblem p = base;
    auto b0 = base.b;
    p.b = [b0, perturbation, eps](const Vector& x, const Vector& alpha) {
        return Vector(b0(x, alpha) + eps * perturbation(x));
    };
    p.name = base.name + "+perturbed";
    return p;
}

/// Copy of `base` with f replaced by f + shift.
inline ControlProblem shift_cost(const ControlProblem& base, double shift) {
    ControlProblem p = base;
    auto f0 = base.f;
    p.f = [f0, shift](const Vector& x, const Vector& alpha) { return f0(x, alpha) + shift; };
    return p;
}

}  // namespace ergodic
