#include <gtest/gtest.h>

#include <random>

#include "spm/oracle.hpp"
#include "spm/spd_core.hpp"

using namespace spm;

namespace {

Mat random_symmetric(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Mat a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = nd(rng);
    return symmetrize(a);
}

Mat jittered(const Mat& s, double jitter) {
    Mat j = s;
    for (Eigen::Index i = 0; i < s.rows(); ++i) j(i, i) += (i + 1) * jitter;
    return j;
}

}  // namespace

TEST(Symmetrize, Examples) {
    Mat a(2, 2);
    a << 1, 3, 1, 1;
    Mat e(2, 2);
    e << 1, 2, 2, 1;
    EXPECT_EQ(symmetrize(a), e);
    EXPECT_EQ(symmetrize(e), e);
    Mat k(2, 2);
    k << 0, 1, -1, 0;
    EXPECT_EQ(symmetrize(k), Mat::Zero(2, 2));
}

TEST(EigSym, Diagonal) {
    Mat d = Vec::Map(std::vector<double>{2.0, 1.0}.data(), 2).asDiagonal();
    auto r = eig_sym(d, 0.0);
    EXPECT_NEAR(r.eigenvalues(0), 1.0, 1e-15);
    EXPECT_NEAR(r.eigenvalues(1), 2.0, 1e-15);
    EXPECT_NEAR(std::abs(r.u(1, 0)), 1.0, 1e-15);
    EXPECT_NEAR(std::abs(r.u(0, 1)), 1.0, 1e-15);
}

TEST(EigSym, JitteredIdentity) {
    auto r = eig_sym(Mat::Identity(2, 2));
    EXPECT_NEAR(r.eigenvalues(0), 1.0 + 1e-8, 1e-15);
    EXPECT_NEAR(r.eigenvalues(1), 1.0 + 2e-8, 1e-15);
    EXPECT_LT((r.u.transpose() * r.u - Mat::Identity(2, 2)).norm(), 1e-14);
}

TEST(EigSym, ReconstructionAndOrthogonality) {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 1000; ++t) {
        const Eigen::Index n = 2 + t % 15;
        Mat s = random_symmetric(n, rng);
        auto r = eig_sym(s);
        const Mat target = jittered(s, kEigJitter);
        ASSERT_LT((r.u * r.eigenvalues.asDiagonal() * r.u.transpose() - target).norm(), 1e-10 * std::max(1.0, target.norm()));
        ASSERT_LT((r.u.transpose() * r.u - Mat::Identity(n, n)).norm(), 1e-12);
        for (Eigen::Index i = 1; i < n; ++i) ASSERT_LE(r.eigenvalues(i - 1), r.eigenvalues(i));
    }
}

TEST(EigSym, AgreesWithIndependentSolver) {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 50; ++t) {
        Mat s = random_symmetric(8, rng);
        Eigen::SelfAdjointEigenSolver<Mat> es(jittered(s, kEigJitter));
        EXPECT_LT((eig_sym(s).eigenvalues - es.eigenvalues()).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Perturb, Examples) {
    Vec a(3);
    a << 2, 2, 2;
    Vec p = perturb_spectrum(a);
    EXPECT_DOUBLE_EQ(p(0), 2 + 1e-8);
    EXPECT_DOUBLE_EQ(p(1), 2 + 2e-8);
    EXPECT_DOUBLE_EQ(p(2), 2 + 3e-8);
    Vec b(2);
    b << 1, 2;
    Vec q = perturb_spectrum(b);
    EXPECT_DOUBLE_EQ(q(0), 1 + 1e-8);
    EXPECT_DOUBLE_EQ(q(1), 2 + 2e-8);
    Vec bad(2);
    bad << 2, 1;
    EXPECT_THROW(perturb_spectrum(bad), std::invalid_argument);
}

TEST(Perturb, EnforcesGap) {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> ud(0, 3);
    for (int t = 0; t < 200; ++t) {
        Vec v(6);
        double x = 0.5;
        for (int i = 0; i < 6; ++i) v(i) = (x += 0.25 * ud(rng));
        Vec p = perturb_spectrum(v);
        for (int i = 1; i < 6; ++i) ASSERT_GE(p(i) - p(i - 1), 1e-8 * (1 - 1e-6));
    }
}

TEST(Chol, Examples) {
    auto a = chol_with_fallback(Mat::Constant(1, 1, 4.0), 0.0);
    EXPECT_DOUBLE_EQ(a.l(0, 0), 2.0);
    Mat s(2, 2);
    s << 4, 2, 2, 5;
    Mat l(2, 2);
    l << 2, 0, 1, 2;
    EXPECT_LT((chol_with_fallback(s, 0.0).l - l).norm(), 1e-15);
    Mat d = Mat::Zero(2, 2);
    d(0, 0) = 1.0;
    auto f = chol_with_fallback(d, 0.0);
    EXPECT_TRUE(f.l.allFinite());
    EXPECT_GE(f.l(1, 1), std::sqrt(1e-4) * (1 - 1e-12));
    EXPECT_TRUE(f.used_fallback);
}

TEST(Chol, NeverRaisesOnFiniteSymmetric) {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 300; ++t) {
        const Eigen::Index n = 2 + t % 9;
        Mat s = random_symmetric(n, rng);
        if (t % 2 == 0) s = s * s.transpose();
        auto f = chol_with_fallback(s);
        ASSERT_TRUE(f.l.allFinite());
        if (!f.used_fallback) {
            Mat target = s + kCholJitter * Mat::Identity(n, n);
            ASSERT_LT((f.l * f.l.transpose() - target).norm() / target.norm(), 1e-8);
        }
    }
}

TEST(RandomSpd, RangeDeterminismValidity) {
    for (unsigned long long seed = 0; seed < 100; ++seed) {
        Mat s = random_spd(5, 0.5, 3.0, seed).mat();
        Eigen::SelfAdjointEigenSolver<Mat> es(s);
        ASSERT_GE(es.eigenvalues().minCoeff(), 0.5 - 1e-12);
        ASSERT_LE(es.eigenvalues().maxCoeff(), 3.0 + 1e-12);
        ASSERT_NO_THROW(SpdMatrix{s});
    }
    EXPECT_EQ(random_spd(4, 1, 2, 9).mat(), random_spd(4, 1, 2, 9).mat());
}

TEST(SpdMatrix, ValidationAndProjection) {
    Mat bad(2, 2);
    bad << 1, 0, 0, -1;
    EXPECT_THROW(SpdMatrix{bad}, std::invalid_argument);
    SpdMatrix p(bad, true);
    Eigen::SelfAdjointEigenSolver<Mat> es(p.mat());
    EXPECT_NEAR(es.eigenvalues()(0), 1e-12, 1e-20);
    Mat nan = Mat::Identity(2, 2);
    nan(0, 0) = std::nan("");
    EXPECT_THROW(SpdMatrix{nan}, std::exception);
}

TEST(RandomOrthogonal, IsOrthogonal) {
    Mat q = random_orthogonal(7, 3ULL);
    EXPECT_LT((q.transpose() * q - Mat::Identity(7, 7)).norm(), 1e-13);
}
