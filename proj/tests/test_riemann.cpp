#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "spm/oracle.hpp"
#include "spm/riemann.hpp"

using namespace spm;

namespace {

Mat random_sym(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Mat a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = nd(rng);
    return symmetrize(a);
}

std::vector<PullbackMetric> spm_metrics() {
    auto g = build_grid();
    return {PullbackMetric::sspm(SplineCurve(g, init_random(g, 21))),
            PullbackMetric::cspm(SplineCurve(g, init_random(g, 22)))};
}

}  // namespace

TEST(Distance, CommutingExample) {
    auto m = PullbackMetric::sspm(identity_curve());
    Mat i2 = Mat::Identity(2, 2);
    EXPECT_NEAR(distance(m, i2, std::exp(2.0) * i2), 2 * std::sqrt(2.0), 1e-7);
    EXPECT_NEAR(distance(m, i2, i2), 0.0, 1e-10);
}

TEST(Distance, MetricAxioms) {
    for (const auto& m : spm_metrics())
        for (unsigned long long s = 0; s < 30; ++s) {
            Mat p = random_spd(3, 0.2, 5.0, 3 * s).mat(), q = random_spd(3, 0.2, 5.0, 3 * s + 1).mat(),
                r = random_spd(3, 0.2, 5.0, 3 * s + 2).mat();
            const double pq = distance(m, p, q);
            EXPECT_GE(pq, 0.0);
            EXPECT_DOUBLE_EQ(pq, distance(m, q, p));
            EXPECT_LE(pq, distance(m, p, r) + distance(m, r, q) + 1e-10);
            EXPECT_LT(distance(m, p, p), 1e-10);
        }
}

TEST(Geodesic, EndpointsMidpointAndConstantSpeed) {
    auto id = PullbackMetric::sspm(identity_curve());
    Mat i2 = Mat::Identity(2, 2);
    EXPECT_LT((geodesic(id, i2, std::exp(2.0) * i2, 0.5) - std::exp(1.0) * i2).cwiseAbs().maxCoeff(), 1e-7);
    for (const auto& m : spm_metrics()) {
        Mat p = random_spd(4, 0.3, 5.0, 1).mat(), q = random_spd(4, 0.3, 5.0, 2).mat();
        EXPECT_LT((geodesic(m, p, q, 0.0) - p).norm() / p.norm(), 1e-8);
        EXPECT_LT((geodesic(m, p, q, 1.0) - q).norm() / q.norm(), 1e-8);
        const double d = distance(m, p, q);
        for (int k = 1; k <= 10; ++k) {
            const double t = k / 10.0;
            EXPECT_NEAR(distance(m, p, geodesic(m, p, q, t)), t * d, 1e-7 * d);
        }
    }
}

TEST(ExpLog, Roundtrip) {
    for (const auto& m : spm_metrics()) {
        Mat p = random_spd(3, 0.3, 5.0, 7).mat();
        EXPECT_LT(log_map(m, p, p).value.norm(), 1e-8);
        EXPECT_LT((exp_map(m, {p, Mat::Zero(3, 3)}) - p).norm(), 1e-8);
        for (unsigned long long s = 0; s < 20; ++s) {
            Mat q = random_spd(3, 0.3, 5.0, 100 + s).mat();
            EXPECT_LT((exp_map(m, log_map(m, p, q)) - q).norm() / q.norm(), 1e-7);
        }
    }
}

TEST(Frechet, Examples) {
    auto id = PullbackMetric::sspm(identity_curve());
    Mat i2 = Mat::Identity(2, 2);
    EXPECT_LT((frechet_mean(id, {i2, std::exp(2.0) * i2}) - std::exp(1.0) * i2).cwiseAbs().maxCoeff(), 1e-7);
    Mat p = random_spd(3, 0.3, 5.0, 9).mat();
    for (const auto& m : spm_metrics()) EXPECT_LT((frechet_mean(m, {p}) - p).norm(), 1e-8);
    EXPECT_THROW(frechet_mean(id, {i2, i2}, {0.5, 0.6}), std::invalid_argument);
    EXPECT_THROW(frechet_mean(id, {i2, i2}, {1.0, 0.0}), std::invalid_argument);
}

TEST(Frechet, AgreesWithBruteForce) {
    std::mt19937_64 rng(31);
    for (const auto& m : spm_metrics())
        for (int k = 0; k < 3; ++k) {
            std::vector<Mat> pts;
            for (int i = 0; i < 5; ++i) pts.push_back(random_spd(3, 0.5, 4.0, rng()).mat());
            std::vector<double> w(5, 0.2);
            EXPECT_LT((frechet_mean(m, pts, w) - oracle::brute_frechet(m, pts, w)).norm(), 1e-6);
        }
}

TEST(Frechet, PerturbationsNeverReduceObjective) {
    std::mt19937_64 rng(32);
    for (const auto& m : spm_metrics()) {
        std::vector<Mat> pts;
        for (int i = 0; i < 5; ++i) pts.push_back(random_spd(3, 0.5, 4.0, rng()).mat());
        std::vector<double> w{0.1, 0.2, 0.3, 0.25, 0.15};
        Mat mean = frechet_mean(m, pts, w);
        const double base = frechet_objective(m, mean, pts, w);
        for (int t = 0; t < 10; ++t) {
            Mat v = random_sym(3, rng);
            EXPECT_GE(frechet_objective(m, exp_map(m, {mean, 1e-3 * v / v.norm()}), pts, w), base);
        }
    }
}

TEST(Transport, IdentityPathIndependenceIsometry) {
    std::mt19937_64 rng(33);
    for (const auto& m : spm_metrics())
        for (int t = 0; t < 20; ++t) {
            Mat a = random_spd(4, 0.2, 5.0, rng()).mat(), b = random_spd(4, 0.2, 5.0, rng()).mat(),
                c = random_spd(4, 0.2, 5.0, rng()).mat();
            TangentVector v{a, random_sym(4, rng)};
            EXPECT_LT((parallel_transport(m, v, a).value - v.value).norm(), 1e-10 * v.value.norm());
            auto direct = parallel_transport(m, v, b);
            auto hop = parallel_transport(m, parallel_transport(m, v, c), b);
            EXPECT_LT((hop.value - direct.value).norm() / direct.value.norm(), 1e-8);
            EXPECT_NEAR(tangent_norm(m, v), tangent_norm(m, direct), 1e-8 * tangent_norm(m, v));
            EXPECT_LT((m.differential(b, direct.value) - m.differential(a, v.value)).norm(), 1e-9 * tangent_norm(m, v));
        }
}

TEST(Mlr, AnchorFreeAndShiftInvariance) {
    std::mt19937_64 rng(34);
    for (const auto& m : spm_metrics()) {
        Mat x = random_spd(3, 0.3, 5.0, 77).mat();
        Mat fx = m.forward(x);
        MlrHead head;
        for (int k = 0; k < 3; ++k) {
            Mat a = random_sym(3, rng);
            if (!m.spectral()) a = lower_half(a);
            head.weights.push_back(a);
            head.anchors.push_back(Mat::Zero(3, 3));
        }
        auto logits = mlr_logits(m, head, x);
        for (int k = 0; k < 3; ++k) EXPECT_NEAR(logits[k], (head.weights[k].array() * fx.array()).sum(), 1e-12);

        Mat anchor = m.forward(random_spd(3, 0.3, 5.0, 78).mat());
        for (auto& p : head.anchors) p = anchor;
        auto base = mlr_logits(m, head, x);
        Mat c = random_sym(3, rng);
        for (auto& a : head.weights) a += c;
        auto shifted = mlr_logits(m, head, x);
        const double shift = (c.array() * (fx - anchor).array()).sum();
        for (int k = 0; k < 3; ++k) EXPECT_NEAR(shifted[k] - base[k], shift, 1e-10);
    }
}
