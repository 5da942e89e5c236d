#include "spm/spd_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace spm {

namespace {

void require_square(const Mat& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("matrix must be square");
}

void require_finite(const Mat& m) {
    if (!m.allFinite()) throw std::invalid_argument("matrix has non-finite entries");
}

}  // namespace

Mat symmetrize(const Mat& m) {
    require_square(m);
    return 0.5 * (m + m.transpose());
}

double asymmetry(const Mat& m) { return (m - m.transpose()).cwiseAbs().maxCoeff(); }

SymmetricMatrix::SymmetricMatrix(const Mat& m) : m_(symmetrize(m)) {}

SpdMatrix::SpdMatrix(const Mat& m, bool project) {
    require_finite(m);
    Mat s = symmetrize(m);
    auto ed = eig_sym(s, 0.0);
    if (project) {
        Vec lam = ed.eigenvalues.cwiseMax(1e-12);
        s = symmetrize(ed.u * lam.asDiagonal() * ed.u.transpose());
    } else if (!(ed.eigenvalues.size() > 0 && ed.eigenvalues(0) > 0)) {
        throw std::invalid_argument("matrix is not positive definite");
    }
    m_ = std::move(s);
}

SpectralDecomp eig_sym(const Mat& s_in, double jitter) {
    require_square(s_in);
    if (!s_in.allFinite()) throw NumericError("eigensolver input has non-finite entries");
    const Eigen::Index n = s_in.rows();
    Mat a = symmetrize(s_in);
    for (Eigen::Index i = 0; i < n; ++i) a(i, i) += static_cast<double>(i + 1) * jitter;
    Mat v = Mat::Identity(n, n);
    const double scale = a.norm();
    bool converged = false;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) off += 2.0 * a(p, q) * a(p, q);
        if (std::sqrt(off) <= 1e-14 * scale) {
            converged = true;
            break;
        }
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - sn * akq;
                    a(k, q) = sn * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - sn * aqk;
                    a(q, k) = sn * apk + c * aqk;
                }
                a(p, q) = a(q, p) = 0.0;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - sn * vkq;
                    v(k, q) = sn * vkp + c * vkq;
                }
            }
        }
    }
    if (!converged || !a.allFinite()) throw NumericError("Jacobi eigensolver did not converge");
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return a(i, i) < a(j, j); });
    SpectralDecomp out;
    out.u.resize(n, n);
    out.eigenvalues.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.eigenvalues(i) = a(order[i], order[i]);
        out.u.col(i) = v.col(order[i]);
    }
    return out;
}

Vec perturb_spectrum(const Vec& lam, const PerturbationPolicy& policy) {
    if (!(policy.delta > 0)) throw std::invalid_argument("perturbation delta must be positive");
    for (Eigen::Index i = 1; i < lam.size(); ++i)
        if (lam(i) < lam(i - 1)) throw std::invalid_argument("eigenvalues must be ascending");
    Vec out = lam;
    for (Eigen::Index i = 0; i < lam.size(); ++i) out(i) += static_cast<double>(i + 1) * policy.delta;
    return out;
}

CholFactor chol_with_fallback(const Mat& s_in, double jitter) {
    require_square(s_in);
    require_finite(s_in);
    const Eigen::Index n = s_in.rows();
    Mat s = symmetrize(s_in);
    Eigen::LLT<Mat> llt(s + jitter * Mat::Identity(n, n));
    if (llt.info() == Eigen::Success) {
        Mat l = llt.matrixL();
        if (l.allFinite() && l.diagonal().minCoeff() > 0) return {l, false};
    }
    auto ed = eig_sym(s, 0.0);
    Vec lam = ed.eigenvalues.cwiseMax(kCholFloor);
    Mat r = symmetrize(ed.u * lam.asDiagonal() * ed.u.transpose());
    Eigen::LLT<Mat> llt2(r);
    if (llt2.info() != Eigen::Success) throw NumericError("Cholesky fallback failed");
    return {Mat(llt2.matrixL()), true};
}

Mat random_orthogonal(Eigen::Index dim, unsigned long long seed) {
    std::mt19937_64 rng(seed);
    return random_orthogonal(dim, rng);
}

Mat random_orthogonal(Eigen::Index dim, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Mat g(dim, dim);
    for (Eigen::Index j = 0; j < dim; ++j)
        for (Eigen::Index i = 0; i < dim; ++i) g(i, j) = nd(rng);
    Eigen::HouseholderQR<Mat> qr(g);
    Mat q = qr.householderQ();
    Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < dim; ++j)
        if (r(j, j) < 0) q.col(j) *= -1.0;
    return q;
}

SpdMatrix random_spd(Eigen::Index dim, double eig_lo, double eig_hi, unsigned long long seed) {
    if (!(eig_lo > 0) || !(eig_lo <= eig_hi)) throw std::invalid_argument("eigenvalue range must be positive and ordered");
    Mat u = random_orthogonal(dim, seed);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> ud(eig_lo, eig_hi);
    Vec lam(dim);
    for (Eigen::Index i = 0; i < dim; ++i) lam(i) = ud(rng);
    return SpdMatrix(symmetrize(u * lam.asDiagonal() * u.transpose()));
}

}  // namespace spm
