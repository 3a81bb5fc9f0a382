#include "ergodic/fpk.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace ergodic;

namespace {

InvariantMeasure ou_measure(double kappa, double radius = 6.0, double h = 0.05) {
    const auto p = builtin_problem("ou1d", {{"kappa", kappa}});
    const auto grid = build_grid(1, radius, nodes_for_spacing(radius, h));
    return stationary_measure(assemble_generator(p, grid, Policy(grid.size(), 0)));
}

Vector random_simplex(std::mt19937_64& rng, Eigen::Index n) {
    std::exponential_distribution<double> e(1.0);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = e(rng);
    return v / v.sum();
}

}  // namespace

TEST(StationaryMeasure, TwoStateChain) {
    Matrix a(2, 2);
    a << -1, 1, 2, -2;
    const auto mu = stationary_measure(make_generator(a));
    EXPECT_NEAR(mu.weights[0], 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(mu.weights[1], 1.0 / 3.0, 1e-15);
    EXPECT_LE(mu.residual, 1e-15);
}

TEST(StationaryMeasure, SymmetricThreeStateChainIsUniform) {
    Matrix a(3, 3);
    a << -2, 1, 1, 1, -2, 1, 1, 1, -2;
    const auto mu = stationary_measure(make_generator(a));
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(mu.weights[i], 1.0 / 3.0, 1e-15);
}

TEST(StationaryMeasure, OuIsDiscreteGaussian) {
    const auto mu = ou_measure(1.0);
    EXPECT_NEAR(mu.weights.sum(), 1.0, 1e-12);
    EXPECT_LE(mu.residual, 1e-10);
    const auto m = measure_moments(mu, {0, 2, 4});
    EXPECT_NEAR(m[0], 1.0, 1e-12);
    EXPECT_NEAR(m[1], 1.0, 1e-2);
    EXPECT_NEAR(m[2], 3.0, 5e-2);
    // density against the standard normal pdf on |x| <= 3
    const auto& g = *mu.grid;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = g.point(i)[0];
        if (std::abs(x) > 3.0) continue;
        const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
        EXPECT_NEAR(mu.weights[static_cast<Eigen::Index>(i)] / g.cell_volume(), pdf, 1e-3);
    }
}

TEST(StationaryMeasure, ReducibleChainIsRejected) {
    Matrix a(3, 3);
    a << -1, 1, 0, 0, 0, 0, 0, 1, -1;
    EXPECT_THROW(stationary_measure(make_generator(a)), PreconditionError);
    Matrix split(4, 4);  // two closed classes
    split << -1, 1, 0, 0, 1, -1, 0, 0, 0, 0, -2, 2, 0, 0, 2, -2;
    EXPECT_THROW(stationary_measure(make_generator(split)), PreconditionError);
}

TEST(StationaryMeasure, RandomChainsArePositiveProbabilities) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + static_cast<int>(unif(rng) * 30);
        Matrix a = Matrix::Zero(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j)
                if (i != j && unif(rng) < 0.3) a(i, j) = unif(rng) * 5.0;
            a(i, (i + 1) % n) += 0.1;  // a cycle keeps the chain irreducible
            a(i, i) = -(a.row(i).sum() - a(i, i));
        }
        const auto g = make_generator(a);
        const auto d = check_markov_generator(g);
        ASSERT_LE(d.max_abs_row_sum, 1e-12);
        ASSERT_GE(d.min_off_diagonal, 0.0);
        const auto mu = stationary_measure(g);
        EXPECT_NEAR(mu.weights.sum(), 1.0, 1e-12);
        EXPECT_GT(mu.weights.minCoeff(), 0.0);
        EXPECT_LE((a.transpose() * mu.weights).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(MeasureMoments, OrderZeroAndNegativeOrders) {
    const auto mu = ou_measure(2.0, 4.0, 0.1);
    EXPECT_NEAR(measure_moments(mu, {0})[0], 1.0, 1e-12);
    EXPECT_THROW(measure_moments(mu, {-1}), ArgumentError);
}

TEST(MeasureMoments, StabilizeWithRadius) {
    const auto m6 = measure_moments(ou_measure(1.0, 6.0), {2, 4});
    const auto m8 = measure_moments(ou_measure(1.0, 8.0), {2, 4});
    for (int j = 0; j < 2; ++j) EXPECT_LE(std::abs(m6[j] - m8[j]), 1e-4);
}

TEST(Positivity, OuMeasureStrictlyPositive) {
    const auto mu = ou_measure(1.0);
    const auto rep = positivity_report(mu);
    EXPECT_TRUE(rep.strictly_positive);
    EXPECT_GT(rep.min_weight, 0.0);
    EXPECT_EQ(rep.zero_count, 0u);
    ASSERT_EQ(rep.boxes.size(), 4u);
    for (std::size_t j = 1; j < rep.boxes.size(); ++j)
        EXPECT_GE(rep.boxes[j].ratio, rep.boxes[j - 1].ratio);
    // the minimum sits in the Gaussian tail
    EXPECT_NEAR(std::abs(mu.grid->point(rep.argmin)[0]), 6.0, 1e-12);
}

TEST(Positivity, UniformAndZeroEntries) {
    const auto uni = positivity_report(make_measure(Vector::Constant(3, 1.0 / 3.0)));
    ASSERT_EQ(uni.boxes.size(), 1u);
    EXPECT_DOUBLE_EQ(uni.boxes[0].ratio, 1.0);
    Vector w(3);
    w << 0.5, 0.0, 0.5;
    const auto z = positivity_report(make_measure(w));
    EXPECT_FALSE(z.strictly_positive);
    EXPECT_EQ(z.zero_count, 1u);
    EXPECT_EQ(z.argmin, 1u);
}

TEST(Distances, IdentityAndSingularity) {
    Vector a(4), b(4);
    a << 0.5, 0.5, 0, 0;
    b << 0, 0, 0.25, 0.75;
    const auto ma = make_measure(a);
    const auto mb = make_measure(b);
    EXPECT_EQ(hellinger_sq(ma, ma), 0.0);
    EXPECT_EQ(tv_distance(ma, ma), 0.0);
    EXPECT_NEAR(hellinger_sq(ma, mb), 1.0, 1e-15);
    EXPECT_NEAR(tv_distance(ma, mb), 2.0, 1e-15);
}

TEST(Distances, GridMismatchIsAnError) {
    const auto m1 = ou_measure(1.0, 4.0, 0.1);
    const auto m2 = ou_measure(1.0, 4.0, 0.2);
    EXPECT_THROW(tv_distance(m1, m2), ArgumentError);
    EXPECT_THROW(hellinger_sq(m1, m2), ArgumentError);
}

TEST(Distances, HellingerBelowTvOnSolvedOuMeasures) {
    const auto m1 = ou_measure(1.0);
    const auto m2 = ou_measure(1.2);
    const double h2 = hellinger_sq(m1, m2);
    const double tv = tv_distance(m1, m2);
    EXPECT_GT(h2, 0.0);
    EXPECT_LE(h2, tv);
}

TEST(Distances, HellingerBelowTvOnRandomPairs) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 1000; ++trial) {
        const Eigen::Index n = 1 + static_cast<Eigen::Index>(trial % 40);
        const auto p = make_measure(random_simplex(rng, n));
        const auto q = make_measure(random_simplex(rng, n));
        const double h2 = hellinger_sq(p, q);
        const double tv = tv_distance(p, q);
        EXPECT_LE(h2, tv);
        EXPECT_GE(h2, 0.0);
        EXPECT_LE(h2, 1.0 + 1e-15);
        EXPECT_LE(tv, 2.0 + 1e-15);
    }
}

TEST(MeasureCsv, HeaderAndDensity) {
    const auto mu = ou_measure(1.0, 1.0, 0.5);
    std::ostringstream os;
    write_measure_csv(os, mu);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "x0,weight,density");
    int rows = 0;
    while (std::getline(in, line)) {
        double x, w, d;
        char c1, c2;
        std::istringstream ls(line);
        ls >> x >> c1 >> w >> c2 >> d;
        EXPECT_DOUBLE_EQ(d, w / 0.5);
        ++rows;
    }
    EXPECT_EQ(rows, 5);
}
