#include "ergodic/simplex.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ergodic;

namespace {

Eigen::MatrixXd mat(int r, int c, std::initializer_list<double> v) {
    Eigen::MatrixXd m(r, c);
    auto it = v.begin();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = *it++;
    return m;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

}  // namespace

TEST(Simplex, SmallStandardFormLp) {
    // min -x1 - 2x2  s.t.  x1 + x2 + s1 = 4,  x1 + 3x2 + s2 = 6
    const auto a = mat(2, 4, {1, 1, 1, 0, 1, 3, 0, 1});
    const auto r = solve_lp(a, vec({4, 6}), vec({-1, -2, 0, 0}));
    ASSERT_EQ(r.status, LpStatus::optimal);
    EXPECT_NEAR(r.objective, -5.0, 1e-12);
    EXPECT_NEAR(r.x[0], 3.0, 1e-12);
    EXPECT_NEAR(r.x[1], 1.0, 1e-12);
    // multipliers satisfy strong duality b^T y = c^T x
    EXPECT_NEAR(vec({4, 6}).dot(r.y), r.objective, 1e-12);
}

TEST(Simplex, InfeasibleAndUnbounded) {
    // x1 + x2 = -1 with x >= 0
    const auto inf = solve_lp(mat(1, 2, {1, 1}), vec({-1}), vec({1, 1}));
    EXPECT_EQ(inf.status, LpStatus::infeasible);
    // min -x1 s.t. x1 - x2 = 0
    const auto unb = solve_lp(mat(1, 2, {1, -1}), vec({0}), vec({-1, 0}));
    EXPECT_EQ(unb.status, LpStatus::unbounded);
}

TEST(Simplex, NegativeRightHandSideSignsOfMultipliers) {
    // -x1 - x2 = -2, min x1 + 3x2 -> x1 = 2, y = -1
    const auto r = solve_lp(mat(1, 2, {-1, -1}), vec({-2}), vec({1, 3}));
    ASSERT_EQ(r.status, LpStatus::optimal);
    EXPECT_NEAR(r.objective, 2.0, 1e-12);
    EXPECT_NEAR(r.y[0], -1.0, 1e-12);
}

TEST(Simplex, RedundantConstraintIsReported) {
    const auto a = mat(2, 2, {1, 1, 2, 2});
    EXPECT_THROW(solve_lp(a, vec({1, 2}), vec({1, 2})), NumericalError);
}

TEST(Simplex, DegenerateProblemTerminates) {
    // Beale's example, which cycles under the largest-coefficient rule
    const auto a = mat(3, 7, {1, 0, 0, 0.25, -8, -1, 9,
                              0, 1, 0, 0.5, -12, -0.5, 3,
                              0, 0, 1, 0, 0, 1, 0});
    const auto r = solve_lp(a, vec({0, 0, 1}), vec({0, 0, 0, -0.75, 20, -0.5, 6}));
    ASSERT_EQ(r.status, LpStatus::optimal);
    EXPECT_NEAR(r.objective, -1.25, 1e-12);
}

TEST(Simplex, RandomFeasibleLpsSatisfyDuality) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
        const int m = 2 + t % 5;
        const int n = m + 3 + t % 4;
        Eigen::MatrixXd a(m, n);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) a(i, j) = unif(rng) * 2.0 - 0.5;
        Eigen::VectorXd x0(n);
        for (int j = 0; j < n; ++j) x0[j] = unif(rng);
        const Eigen::VectorXd b = a * x0;
        Eigen::VectorXd c(n);
        for (int j = 0; j < n; ++j) c[j] = unif(rng);  // c >= 0 keeps it bounded
        const auto r = solve_lp(a, b, c);
        ASSERT_EQ(r.status, LpStatus::optimal) << "trial " << t;
        EXPECT_LE((a * r.x - b).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_GE(r.x.minCoeff(), -1e-12);
        EXPECT_LE(r.objective, c.dot(x0) + 1e-12);
        EXPECT_NEAR(b.dot(r.y), r.objective, 1e-9);
        // dual feasibility: reduced costs nonnegative
        EXPECT_GE((c - a.transpose() * r.y).minCoeff(), -1e-9);
    }
}

TEST(Simplex, DimensionMismatch) {
    EXPECT_THROW(solve_lp(mat(1, 2, {1, 1}), vec({1, 2}), vec({1, 1})), ArgumentError);
}
