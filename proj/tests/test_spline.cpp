#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "spm/oracle.hpp"
#include "spm/spline.hpp"

using namespace spm;

TEST(Grid, MinimalClamped) {
    auto g = build_grid(1, 1, 0.0, 1.0);
    EXPECT_EQ(g.knots, (std::vector<double>{0, 0, 1, 1}));
    auto g2 = build_grid(1, 2, 0.0, 2.0);
    EXPECT_EQ(g2.knots, (std::vector<double>{0, 0, 1, 2, 2}));
}

TEST(Grid, DefaultCounts) {
    auto g = build_grid();
    EXPECT_EQ(g.knots.size(), 17u);
    EXPECT_EQ(g.basis_count(), 13);
    EXPECT_DOUBLE_EQ(g.spacing(), 3.0);
    for (int i = 0; i <= 3; ++i) {
        EXPECT_EQ(g.knots[i], -15.0);
        EXPECT_EQ(g.knots[16 - i], 15.0);
    }
    for (int i = 4; i <= 12; ++i) EXPECT_DOUBLE_EQ(g.knots[i] - g.knots[i - 1], 3.0);
}

TEST(Grid, RejectsBadInput) {
    EXPECT_THROW(build_grid(3, 0, -1, 1), std::invalid_argument);
    EXPECT_THROW(build_grid(3, 4, 1, 1), std::invalid_argument);
    EXPECT_THROW(build_grid(-1, 4, 0, 1), std::invalid_argument);
}

TEST(Basis, HandValues) {
    std::vector<double> k0{0, 1};
    EXPECT_EQ(basis_eval(k0, 0, 0, 0.5), 1.0);
    std::vector<double> k1{0, 1, 2};
    EXPECT_DOUBLE_EQ(basis_eval(k1, 0, 1, 1.0), 1.0);
    EXPECT_DOUBLE_EQ(basis_eval(k1, 0, 1, 0.5), 0.5);
}

TEST(Basis, PartitionOfUnity) {
    auto g = build_grid();
    for (int i = 0; i <= 3000; ++i) {
        const double x = -15.0 + 30.0 * i / 3000.0;
        double s = 0.0;
        for (int j = 0; j < g.basis_count(); ++j) s += basis_eval(g, j, 3, x);
        ASSERT_NEAR(s, 1.0, 1e-12) << x;
        auto all = basis_all(g.knots, 3, x);
        double s2 = 0.0;
        for (int j = 0; j < g.basis_count(); ++j) {
            s2 += all[j];
            ASSERT_NEAR(all[j], basis_eval(g, j, 3, x), 1e-14);
        }
        ASSERT_NEAR(s2, 1.0, 1e-12);
    }
}

TEST(Basis, IndexOutOfRangeThrows) {
    auto g = build_grid();
    EXPECT_EQ(basis_eval(g, 0, 3, 15.5), 0.0);
    EXPECT_THROW(basis_eval(g, 99, 3, 0.0), std::out_of_range);
}

TEST(Control, HandEvaluation) {
    MonotoneSplineParams p;
    p.c0_raw = 0.0;
    p.step_weights = {0.0, 0.0};
    p.min_step = 0.01;
    auto c = control_points(p);
    ASSERT_EQ(c.size(), 3u);
    EXPECT_NEAR(c[1], std::log(2.0) + 0.01, 1e-15);
    EXPECT_NEAR(c[2], 2 * (std::log(2.0) + 0.01), 1e-15);
    EXPECT_NEAR(c[1], 0.703147, 1e-6);
}

TEST(Control, VeryNegativeWeightsGiveMinStep) {
    MonotoneSplineParams p;
    p.step_weights = std::vector<double>(5, -800.0);
    auto c = control_points(p);
    for (std::size_t i = 1; i < c.size(); ++i) EXPECT_NEAR(c[i] - c[i - 1], p.min_step, 1e-18);
}

TEST(Softplus, StableAndInverse) {
    EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-16);
    EXPECT_EQ(softplus(1000.0), 1000.0);
    EXPECT_GT(softplus(-800.0), -1.0);
    for (double s : {1e-6, 0.3, 1.0, 3.0, 40.0}) EXPECT_NEAR(softplus(softplus_inv(s)), s, 1e-12 * std::max(1.0, s));
}

TEST(Identity, ReproducesLog) {
    auto c = identity_curve();
    EXPECT_NEAR(c.eval(1.0), 0.0, 1e-12);
    EXPECT_NEAR(c.deriv(1.0), 1.0, 1e-12);
    EXPECT_NEAR(c.invert(0.0), 1.0, 1e-12);
    double sup = 0.0;
    for (int i = 0; i <= 24000; ++i) {
        const double y = -12.0 + 24.0 * i / 24000.0;
        sup = std::max(sup, std::abs(c.eval_log(y) - y));
    }
    EXPECT_LT(sup, 1e-9 + 10 * 1e-4);
    EXPECT_LT(sup, 1e-12);
    EXPECT_NEAR(c.slope_left(), 1.0, 1e-9 + 1e-4 / 3.0);
    EXPECT_NEAR(c.slope_right(), 1.0, 1e-9 + 1e-4 / 3.0);
    EXPECT_NEAR(c.eval(std::exp(20.0)), 20.0, 1e-9);
    EXPECT_NEAR(c.eval(std::exp(-20.0)), -20.0, 1e-9);
    const double sup_oracle = oracle::sample_sup_error([&](double x) { return c.eval(x); },
                                                       [](double x) { return std::log(x); }, std::exp(-12.0),
                                                       std::exp(12.0), 5000);
    EXPECT_LT(sup_oracle, 1e-9 + 10 * 1e-4);
}

TEST(Identity, InteriorStepsEqualSpacing) {
    auto g = build_grid();
    auto c = identity_curve(g).control();
    for (std::size_t i = 3; i + 2 < c.size(); ++i) EXPECT_NEAR(c[i] - c[i - 1], g.spacing(), 1e-12);
}

class RandomCurve : public ::testing::TestWithParam<unsigned long long> {};

TEST_P(RandomCurve, StrictlyMonotoneWithPositiveDerivative) {
    auto g = build_grid();
    SplineCurve c(g, init_random(g, GetParam()));
    std::mt19937_64 rng(GetParam());
    std::uniform_real_distribution<double> ud(-25.0, 25.0);
    for (int i = 0; i < 1000; ++i) {
        double a = ud(rng), b = ud(rng);
        if (a == b) continue;
        if (a > b) std::swap(a, b);
        ASSERT_LT(c.eval(std::exp(a)), c.eval(std::exp(b)));
    }
    double min_d = 1e300;
    for (int i = 0; i < 10000; ++i) min_d = std::min(min_d, c.deriv(std::exp(-20.0 + 40.0 * i / 9999.0)));
    EXPECT_GT(min_d, 0.0);
}

TEST_P(RandomCurve, InverseRoundtripTwelveDecades) {
    auto g = build_grid();
    SplineCurve c(g, init_random(g, GetParam()));
    for (int i = 0; i <= 600; ++i) {
        const double x = std::pow(10.0, -6.0 + 12.0 * i / 600.0);
        ASSERT_NEAR(c.invert(c.eval(x)), x, 1e-10 * x);
    }
}

TEST_P(RandomCurve, DerivativeMatchesFiniteDifferences) {
    auto g = build_grid();
    SplineCurve c(g, init_random(g, GetParam()));
    for (double y : {-20.0, -14.0, -13.7, -8.2, -1.1, 0.4, 5.5, 10.1, 14.2, 19.0}) {
        const double x = std::exp(y), h = 1e-6 * x;
        const double fd = (c.eval(x + h) - c.eval(x - h)) / (2 * h);
        EXPECT_NEAR(c.deriv(x), fd, 1e-6 * std::abs(fd)) << y;
    }
}

TEST_P(RandomCurve, C1AtBranchJoins) {
    auto g = build_grid();
    SplineCurve c(g, init_random(g, GetParam()));
    for (double edge : {g.lo, g.hi}) {
        const double h = 1e-7;
        const double left = (c.eval_log(edge) - c.eval_log(edge - h)) / h;
        const double right = (c.eval_log(edge + h) - c.eval_log(edge)) / h;
        EXPECT_NEAR(left, right, 1e-6 * std::abs(right));
        EXPECT_NEAR(c.deriv_log(edge - 1e-12), c.deriv_log(edge + 1e-12), 1e-8 * c.deriv_log(edge));
    }
}

TEST_P(RandomCurve, GradWeightsMatchFiniteDifferences) {
    auto g = build_grid();
    SplineCurve c(g, init_random(g, GetParam()));
    for (double y : {-18.0, -4.3, 0.7, 12.9, 17.5}) {
        const double x = std::exp(y);
        auto an = c.grad_weights(x, 1.0);
        auto fd = oracle::finite_diff_vec([&](const std::vector<double>& p) { return c.with_flat_params(p).eval(x); },
                                          c.flat_params());
        double num = 0, den = 0;
        for (std::size_t i = 0; i < an.size(); ++i) {
            num += (an[i] - fd[i]) * (an[i] - fd[i]);
            den += fd[i] * fd[i];
        }
        EXPECT_LT(std::sqrt(num / den), 1e-6) << y;
    }
}

TEST_P(RandomCurve, GradDerivLogMatchesFiniteDifferences) {
    auto g = build_grid();
    SplineCurve c(g, init_random(g, GetParam()));
    for (double y : {-18.0, -4.3, 0.7, 12.9, 17.5}) {
        std::vector<double> an(c.param_count(), 0.0);
        c.grad_deriv_log_weights(y, 1.0, an);
        auto fd = oracle::finite_diff_vec(
            [&](const std::vector<double>& p) { return c.with_flat_params(p).deriv_log(y); }, c.flat_params());
        for (std::size_t i = 0; i < an.size(); ++i) EXPECT_NEAR(an[i], fd[i], 1e-6 * (1.0 + std::abs(fd[i]))) << y;
    }
}

INSTANTIATE_TEST_SUITE_P(Seeds, RandomCurve, ::testing::Values(7ULL, 8ULL, 123ULL, 99991ULL));

TEST(RandomInit, Determinism) {
    auto g = build_grid();
    EXPECT_EQ(init_random(g, 5).step_weights, init_random(g, 5).step_weights);
    EXPECT_NE(init_random(g, 5).step_weights, init_random(g, 6).step_weights);
}

TEST(Invert, LinearBranchClosedForm) {
    auto g = build_grid();
    SplineCurve c(g, init_random(g, 3));
    const double y = c.control().back() + 4.0;
    EXPECT_NEAR(c.invert(y), std::exp((y - c.control().back()) / c.slope_right() + g.hi), 1e-10 * c.invert(y));
}

TEST(Json, RoundtripIsBitExact) {
    auto g = build_grid();
    SplineCurve c(g, init_random(g, 11));
    auto d = SplineCurve::from_json(c.to_json());
    EXPECT_EQ(d.flat_params(), c.flat_params());
    EXPECT_EQ(d.grid().knots, c.grid().knots);
    EXPECT_THROW(SplineCurve::from_json("{\"degree\": 3}"), std::exception);
}

TEST(Affine, ReproducesAffineMap) {
    auto g = build_grid();
    SplineCurve c(g, init_affine(g, 0.4, 1.5));
    for (double y : {-14.0, -3.0, 0.0, 9.5}) EXPECT_NEAR(c.eval_log(y), 0.4 * y + 1.5, 1e-12);
    EXPECT_THROW(init_affine(g, 1e-6, 0.0), std::invalid_argument);
}
