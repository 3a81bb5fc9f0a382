#include "ergodic/primal.hpp"
#include "ergodic/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ergodic;

namespace {

Matrix two_state() {
    Matrix g(2, 2);
    g << -1, 1, 2, -2;
    return g;
}

DiscreteModel toy_model() {
    Matrix cost(2, 1);
    cost << 0, 3;
    return make_model({two_state()}, cost, "toy");
}

DiscreteModel benchmark(const std::string& name, double radius, double h,
                        DriftScheme scheme = DriftScheme::hybrid) {
    const auto p = builtin_problem(name, {});
    return discretize(p, build_grid(1, radius, nodes_for_spacing(radius, h)), {scheme});
}

bool nonincreasing(const std::vector<double>& h) {
    for (std::size_t j = 1; j < h.size(); ++j)
        if (h[j] > h[j - 1] + 1e-12) return false;
    return true;
}

}  // namespace

TEST(Objective, ConstantCostGivesConstant) {
    const auto p = shift_cost(builtin_problem("lq1d", {{"n_ctrl", 5}}), 0.0);
    ControlProblem flat = p;
    flat.f = [](const Vector&, const Vector&) { return 1.75; };
    const auto grid = build_grid(1, 3.0, 31);
    std::mt19937_64 rng(1);
    for (int t = 0; t < 5; ++t) {
        Policy pol(grid.size());
        for (auto& v : pol) v = rng() % 5;
        EXPECT_NEAR(objective(flat, grid, pol).c, 1.75, 1e-13);
    }
}

TEST(Objective, TwoStateToy) {
    const auto obj = objective(toy_model(), Policy{0, 0});
    EXPECT_NEAR(obj.c, 1.0, 1e-15);
}

TEST(Objective, OuSecondMoment) {
    const auto p = builtin_problem("ou1d", {});
    const auto grid = build_grid(1, 6.0, 241);
    const auto obj = objective(p, grid, Policy(241, 0));
    EXPECT_NEAR(obj.c, 1.0, 1e-2);
    // the model-based and problem-based evaluations coincide
    EXPECT_NEAR(objective(discretize(p, grid), Policy(241, 0)).c, obj.c, 1e-15);
}

TEST(SolvePoisson, ZeroRightHandSide) {
    const auto m = benchmark("ou1d", 3.0, 0.1);
    const auto g = m.policy_generator(Policy(m.nodes(), 0));
    const auto mu = stationary_measure(g);
    const Vector f = Vector::Constant(static_cast<Eigen::Index>(m.nodes()), 2.5);
    const auto ps = solve_poisson(g, f, 2.5, mu, m.default_anchor());
    EXPECT_LE(ps.u.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(SolvePoisson, OuCorrector) {
    const auto m = benchmark("ou1d", 6.0, 0.05);
    const Policy pol(m.nodes(), 0);
    const auto g = m.policy_generator(pol);
    const auto mu = stationary_measure(g);
    const Vector f = m.policy_cost(pol);
    const double c = f.dot(mu.weights);
    const auto anchor = m.default_anchor();
    const auto ps = solve_poisson(g, f, c, mu, anchor);
    EXPECT_EQ(ps.u[static_cast<Eigen::Index>(anchor)], 0.0);
    EXPECT_LE(ps.residual, 1e-8);
    double err = 0.0;
    for (std::size_t i = 0; i < m.nodes(); ++i) {
        const double x = m.grid->point(i)[0];
        if (std::abs(x) <= 3.0)
            err = std::max(err, std::abs(ps.u[static_cast<Eigen::Index>(i)] + 0.5 * x * x));
    }
    EXPECT_LE(err, 5e-3);
}

TEST(SolvePoisson, TwoStateHandSolve) {
    const auto g = make_generator(two_state());
    const auto mu = stationary_measure(g);
    Vector f(2);
    f << 0, 3;
    const auto ps = solve_poisson(g, f, 1.0, mu, 0);
    EXPECT_EQ(ps.u[0], 0.0);
    EXPECT_NEAR(ps.u[1], -1.0, 1e-15);
}

TEST(SolvePoisson, IncompatibleRightHandSideIsRejected) {
    const auto g = make_generator(two_state());
    const auto mu = stationary_measure(g);
    Vector f(2);
    f << 0, 3;
    EXPECT_THROW(solve_poisson(g, f, 1.5, mu, 0), PreconditionError);
    EXPECT_THROW(solve_poisson(g, f, 1.0, mu, 2), ArgumentError);
}

TEST(ImprovePolicy, NearestTargetWithDriftFreeControls) {
    ControlProblem p;
    p.name = "target";
    p.dim = 1;
    p.controls = ControlSet::interval(-1.0, 1.0, 9);
    p.a = [](const Vector&, const Vector&) { return Matrix::Identity(1, 1); };
    p.b = [](const Vector&, const Vector&) { return Vector::Zero(1); };
    p.f = [](const Vector& x, const Vector& a) {
        const double g = std::sin(x[0]);
        return (a[0] - g) * (a[0] - g);
    };
    const auto grid = build_grid(1, 3.0, 61);
    const auto m = discretize(p, grid);
    const Policy pol = improve_policy(m, Vector::Zero(61));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double g = std::sin(grid.point(i)[0]);
        double best = 1e9;
        for (std::size_t k = 0; k < p.controls.size(); ++k)
            best = std::min(best, std::abs(p.controls[k][0] - g));
        EXPECT_DOUBLE_EQ(std::abs(p.controls[pol[i]][0] - g), best) << "node " << i;
    }
}

TEST(ImprovePolicy, LqArgminIsMinusX) {
    const auto m = benchmark("lq1d", 6.0, 0.05);
    Vector u(static_cast<Eigen::Index>(m.nodes()));
    for (std::size_t i = 0; i < m.nodes(); ++i) {
        const double x = m.grid->point(i)[0];
        u[static_cast<Eigen::Index>(i)] = -x * x;
    }
    const auto p = builtin_problem("lq1d", {});
    const Policy pol = improve_policy(m, u);
    for (std::size_t i = 1; i + 1 < m.nodes(); ++i) {
        const double x = m.grid->point(i)[0];
        const double target = std::clamp(-x, -4.0, 4.0);
        EXPECT_LE(std::abs(p.controls[pol[i]][0] - target), 0.05 + 1e-9) << "x = " << x;
    }
}

TEST(ImprovePolicy, SingletonAndTies) {
    const auto m = benchmark("ou1d", 2.0, 0.5);
    const Policy pol = improve_policy(m, Vector::Random(static_cast<Eigen::Index>(m.nodes())));
    for (auto v : pol) EXPECT_EQ(v, 0u);

    // identical controls: lowest index wins, unless the current choice is kept
    Matrix cost(2, 3);
    cost << 1, 1, 1, 2, 2, 2;
    const auto tied = make_model({two_state(), two_state(), two_state()}, cost);
    EXPECT_EQ(improve_policy(tied, Vector::Zero(2)), (Policy{0, 0}));
    const Policy current{2, 1};
    EXPECT_EQ(improve_policy(tied, Vector::Zero(2), &current), current);
}

TEST(PolicyIteration, OuConvergesInOneIteration) {
    const auto m = benchmark("ou1d", 6.0, 0.05);
    const auto s = policy_iteration(m);
    EXPECT_EQ(s.iterations, 1);
    EXPECT_TRUE(s.converged_by_fixpoint);
    EXPECT_NEAR(s.c, 1.0, 1e-2);
    EXPECT_EQ(s.u[static_cast<Eigen::Index>(s.anchor_index)], 0.0);
    EXPECT_LE(s.poisson_residual, 1e-8);
    EXPECT_LE(s.hjb_residual_sup, 1e-8);
}

TEST(PolicyIteration, LqClosedForm) {
    const auto m = benchmark("lq1d", 6.0, 0.05);
    const auto p = builtin_problem("lq1d", {});
    const auto s = policy_iteration(m);
    EXPECT_NEAR(s.c, 2.0, 2e-2);
    EXPECT_TRUE(s.converged_by_fixpoint);
    EXPECT_LE(s.iterations, 50);
    EXPECT_TRUE(nonincreasing(s.history));
    EXPECT_LE(s.poisson_residual, 1e-8);
    for (std::size_t i = 0; i < m.nodes(); ++i) {
        const double x = m.grid->point(i)[0];
        if (std::abs(x) > 3.0) continue;
        EXPECT_LE(std::abs(p.controls[s.policy[i]][0] + x), 0.1 + 1e-9) << "x = " << x;
        EXPECT_LE(std::abs(s.u[static_cast<Eigen::Index>(i)] + x * x), 2e-2) << "x = " << x;
    }
    // fixed point: improving the final corrector returns the final policy
    const double tie = 1e-12 * (1.0 + m.cost.cwiseAbs().maxCoeff());
    EXPECT_EQ(improve_policy(m, s.u, &s.policy, tie), s.policy);
}

TEST(PolicyIteration, MatchesOracleOnRandomInstances) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const int nodes = 4 + static_cast<int>(seed % 9);       // 4..12
        const int controls = 1 + static_cast<int>(seed % 3);    // 1..3
        if (std::pow(controls, nodes) > 2e5) continue;
        const auto inst = random_table_instance(nodes, controls, seed);
        const auto m = discretize(inst.problem, inst.grid);
        const auto s = policy_iteration(m);
        const auto o = enumerate_policies_oracle(m);
        EXPECT_NEAR(s.c, o.c_min, 1e-10) << "seed " << seed;
        EXPECT_TRUE(nonincreasing(s.history)) << "seed " << seed;
        // policies agree on nodes with a strict argmin
        const Matrix q = hamiltonian_table(m, s.u);
        for (std::size_t i = 0; i < m.nodes(); ++i) {
            const auto row = q.row(static_cast<Eigen::Index>(i));
            int near_min = 0;
            for (Eigen::Index k = 0; k < row.size(); ++k)
                if (row[k] <= row.minCoeff() + 1e-9) ++near_min;
            if (near_min == 1) {
                EXPECT_EQ(s.policy[i], o.best_policy[i]) << "seed " << seed;
            }
        }
    }
}

TEST(PolicyIteration, TwelveNodeThreeControlMatchesOracle) {
    const auto inst = random_table_instance(12, 3, 2024);
    const auto m = discretize(inst.problem, inst.grid);
    const auto s = policy_iteration(m);
    const auto o = enumerate_policies_oracle(m);
    EXPECT_EQ(o.evaluated, 531441u);
    EXPECT_NEAR(s.c, o.c_min, 1e-10);
}

TEST(PolicyIteration, MaxIterCarriesBestSoFar) {
    const auto m = benchmark("lq1d", 6.0, 0.05);
    PolicyIterationOptions o;
    o.max_iter = 2;
    o.tol = 0.0;
    try {
        policy_iteration(m, o);
        FAIL() << "expected PolicyIterationError";
    } catch (const PolicyIterationError& e) {
        EXPECT_EQ(e.best().history.size(), 2u);
        EXPECT_EQ(e.best().iterations, 2);
        EXPECT_TRUE(std::isfinite(e.best().c));
    }
}

TEST(PolicyIteration, OptionsValidation) {
    const auto m = benchmark("ou1d", 1.0, 0.5);
    PolicyIterationOptions o;
    o.anchor = 99;
    EXPECT_THROW(policy_iteration(m, o), ArgumentError);
    o.anchor.reset();
    o.initial = Policy(2, 0);
    EXPECT_THROW(policy_iteration(m, o), ArgumentError);
}

TEST(PolicyIteration, ShiftCovariance) {
    const auto p = builtin_problem("lq1d", {{"n_ctrl", 21}});
    const auto grid = build_grid(1, 4.0, 81);
    const auto s0 = policy_iteration(discretize(p, grid));
    const auto s1 = policy_iteration(discretize(shift_cost(p, 0.75), grid));
    EXPECT_NEAR(s1.c - s0.c, 0.75, 1e-12);
    EXPECT_EQ(s0.policy, s1.policy);
    EXPECT_LE((s0.u - s1.u).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Oracle, SingletonAndDominance) {
    const auto m = benchmark("ou1d", 1.0, 0.5);
    const auto o = enumerate_policies_oracle(m);
    EXPECT_EQ(o.evaluated, 1u);
    EXPECT_EQ(o.best_policy, Policy(m.nodes(), 0));

    Matrix cost(2, 2);
    cost << 0.5, 1.0, 0.2, 0.7;
    const auto dom = make_model({two_state(), two_state()}, cost);
    const auto od = enumerate_policies_oracle(dom);
    EXPECT_EQ(od.best_policy, (Policy{0, 0}));
    EXPECT_EQ(od.evaluated, 4u);
    EXPECT_NEAR(od.c_min, 0.5 * 2.0 / 3.0 + 0.2 / 3.0, 1e-15);
}

TEST(Oracle, RefusesLargeSearchSpace) {
    const auto inst = random_table_instance(13, 3, 1);  // 3^13 > 1e6
    EXPECT_THROW(enumerate_policies_oracle(discretize(inst.problem, inst.grid)), ArgumentError);
}

TEST(ExchangeProperty, ExactOnRandomTables) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> unif(-5.0, 5.0);
    std::uniform_real_distribution<double> weight(0.0, 1.0);
    for (int t = 0; t < 500; ++t) {
        const Eigen::Index n = 1 + t % 7;
        const Eigen::Index k = 1 + t % 4;
        Matrix table(n, k);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < k; ++j) table(i, j) = unif(rng);
        Vector q(n);
        for (Eigen::Index i = 0; i < n; ++i) q[i] = t % 5 == 0 && i == 0 ? 0.0 : weight(rng);
        EXPECT_EQ(pointwise_min_integral(table, q), min_over_policies_integral(table, q));
    }
}
