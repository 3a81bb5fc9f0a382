#pragma once

// Seeded random problem instances for property and oracle suites.

#include "ergodic/grid.hpp"
#include "ergodic/problem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace ergodic {

struct RandomInstance {
    ControlProblem problem;
    Grid grid;
};

/// 1-D instance on n_nodes grid points of [-1, 1] whose coefficients are
/// independent random tables per (node, control): a in [0.5, 1.5],
/// b in [-3, 3], f in [0, 1]. Controls are the scalars 0, 1, ..., n_controls-1.
inline RandomInstance random_table_instance(int n_nodes, int n_controls, std::uint64_t seed) {
    if (n_nodes < 3 || n_controls < 1)
        throw ArgumentError("random_table_instance: need n_nodes >= 3 and n_controls >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto n = static_cast<std::size_t>(n_nodes);
    const auto k = static_cast<std::size_t>(n_controls);
    auto a = std::make_shared<std::vector<double>>(n * k);
    auto b = std::make_shared<std::vector<double>>(n * k);
    auto f = std::make_shared<std::vector<double>>(n * k);
    for (std::size_t i = 0; i < n * k; ++i) {
        (*a)[i] = 0.5 + unif(rng);
        (*b)[i] = 6.0 * unif(rng) - 3.0;
        (*f)[i] = unif(rng);
    }

    RandomInstance inst;
    inst.grid = build_grid(1, 1.0, n_nodes);
    const double h = inst.grid.spacing();
    auto slot = [n, k, h](const Vector& x, const Vector& alpha) {
        auto i = static_cast<long>(std::lround((x[0] + 1.0) / h));
        i = std::clamp(i, 0L, static_cast<long>(n) - 1);
        auto c = static_cast<long>(std::lround(alpha[0]));
        c = std::clamp(c, 0L, static_cast<long>(k) - 1);
        return static_cast<std::size_t>(i) * k + static_cast<std::size_t>(c);
    };

    auto& p = inst.problem;
    p.name = "random_table";
    p.dim = 1;
    p.controls = ControlSet::interval(0.0, static_cast<double>(n_controls - 1), n_controls);
    p.a = [a, slot](const Vector& x, const Vector& alpha) {
        return Matrix::Constant(1, 1, (*a)[slot(x, alpha)]);
    };
    p.b = [b, slot](const Vector& x, const Vector& alpha) {
        return Vector::Constant(1, (*b)[slot(x, alpha)]);
    };
    p.f = [f, slot](const Vector& x, const Vector& alpha) { return (*f)[slot(x, alpha)]; };
    p.growth = {0.5, 1.5, 4.0, 1.0, 2.0, 1.0, 2.0, 3.0, 0.0};
    return inst;
}

/// Smooth random problem in 1 or 2 dimensions with a confining drift,
/// a diffusion matrix that satisfies the cross-term dominance condition on
/// a uniform grid, and 1 to 3 controls shifting the drift.
inline RandomInstance random_smooth_instance(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const int dim = unif(rng) < 0.5 ? 1 : 2;
    const int n_ctrl = 1 + static_cast<int>(unif(rng) * 3.0);
    const double radius = 1.0 + 3.0 * unif(rng);
    const int n_axis = dim == 1 ? 5 + static_cast<int>(unif(rng) * 30.0)
                                : 4 + static_cast<int>(unif(rng) * 8.0);

    const double lam0 = 0.5 + unif(rng);
    const double lam1 = 0.5 + unif(rng);
    const double wiggle = 0.3 * unif(rng);
    const double rho = 0.9 * (2.0 * unif(rng) - 1.0);
    const double kappa = 0.5 + 2.0 * unif(rng);
    const double swirl = 2.0 * unif(rng) - 1.0;
    const double push = 2.0 * unif(rng);
    std::vector<double> shift(static_cast<std::size_t>(n_ctrl));
    for (auto& s : shift) s = 2.0 * unif(rng) - 1.0;

    RandomInstance inst;
    inst.grid = build_grid(dim, radius, n_axis);
    auto& p = inst.problem;
    p.name = "random_smooth";
    p.dim = dim;
    p.controls = ControlSet::interval(-1.0, 1.0, n_ctrl);
    p.a = [=](const Vector& x, const Vector&) {
        Matrix a = Matrix::Zero(dim, dim);
        const double s = std::sin(x.sum());
        a(0, 0) = lam0 * (1.0 + wiggle * s);
        if (dim == 2) {
            a(1, 1) = lam1 * (1.0 - wiggle * s);
            const double off = rho * std::min(a(0, 0), a(1, 1)) * std::cos(x[0] - x[1]);
            a(0, 1) = off;
            a(1, 0) = off;
        }
        return a;
    };
    p.b = [=](const Vector& x, const Vector& alpha) {
        Vector b = -kappa * x;
        b[0] += push * alpha[0];
        if (dim == 2) {
            b[0] += swirl * x[1];
            b[1] -= swirl * x[0];
        }
        return b;
    };
    const double c0 = unif(rng);
    p.f = [=](const Vector& x, const Vector& alpha) {
        return x.squaredNorm() + c0 * alpha[0] * alpha[0] + std::cos(3.0 * x[0]);
    };
    p.growth = {0.05, 3.0, 10.0, 0.1, 2.0, 10.0, 2.0, 10.0, 1.0};
    return inst;
}

}  // namespace ergodic
