#include "spm/oracle.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace spm::oracle {

namespace {

double checked(double v) {
    if (!std::isfinite(v)) throw std::domain_error("oracle function returned a non-finite value");
    return v;
}

}  // namespace

Mat finite_diff_grad(const std::function<double(const Mat&)>& fn, const Mat& s, const FdConfig& config) {
    if (!(config.h > 0)) throw std::invalid_argument("step must be positive");
    const Eigen::Index n = s.rows();
    const double h = config.h;
    Mat g(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            Mat e = Mat::Zero(n, n);
            e(i, j) = e(j, i) = 1.0;
            const double scale = i == j ? 1.0 : 2.0;
            const double fp = checked(fn(s + h * e));
            const double fm = checked(fn(s - h * e));
            g(i, j) = g(j, i) = (fp - fm) / (2.0 * h * scale);
        }
    }
    return g;
}

std::vector<double> finite_diff_vec(const std::function<double(const std::vector<double>&)>& fn,
                                    const std::vector<double>& p, double h) {
    std::vector<double> g(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        auto a = p, b = p;
        a[i] += h;
        b[i] -= h;
        g[i] = (checked(fn(a)) - checked(fn(b))) / (2.0 * h);
    }
    return g;
}

Mat expm_sym(const Mat& s) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (s + s.transpose()));
    if (es.info() != Eigen::Success) throw std::runtime_error("eigensolver failed");
    return es.eigenvectors() * es.eigenvalues().array().exp().matrix().asDiagonal() * es.eigenvectors().transpose();
}

Mat logm_spd(const Mat& s) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (s + s.transpose()));
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0) throw std::runtime_error("not SPD");
    return es.eigenvectors() * es.eigenvalues().array().log().matrix().asDiagonal() * es.eigenvectors().transpose();
}

Mat brute_frechet(const PullbackMetric& metric, const std::vector<Mat>& points, const std::vector<double>& weights,
                  int steps) {
    if (points.empty() || points.size() != weights.size()) throw std::invalid_argument("invalid point set");
    const Eigen::Index n = points[0].rows();
    auto objective = [&](const Mat& g) {
        Mat m = expm_sym(g);
        double s = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const double d = (metric.forward(m) - metric.forward(points[i])).norm();
            s += weights[i] * d * d;
        }
        return s;
    };
    auto gradient = [&](const Mat& g) {
        Mat out(n, n);
        const double h = 1e-6;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j <= i; ++j) {
                Mat e = Mat::Zero(n, n);
                e(i, j) = e(j, i) = 1.0;
                out(i, j) = out(j, i) = (objective(g + h * e) - objective(g - h * e)) / (2.0 * h);
            }
        return out;
    };

    Mat arith = Mat::Zero(n, n);
    for (std::size_t i = 0; i < points.size(); ++i) arith += weights[i] * points[i];
    Mat g = logm_spd(arith);
    double f = objective(g);
    Mat grad = gradient(g);
    Mat best = g;
    double best_norm = grad.norm();
    double alpha = 1e-2;
    int increases = 0;
    // Nonmonotone Barzilai-Borwein steps; near the minimum objective differences fall below
    // rounding, so progress and the best iterate are judged by the gradient norm.
    for (int it = 0; it < steps && best_norm > 1e-13; ++it) {
        Mat trial = g - alpha * grad;
        const double ft = objective(trial);
        if (!std::isfinite(ft) || ft > 10.0 * f + 1.0) {
            alpha *= 0.5;
            continue;
        }
        if (ft > f) {
            if (++increases >= 50) throw std::runtime_error("brute-force Frechet search diverged");
        } else {
            increases = 0;
        }
        Mat next_grad = gradient(trial);
        Mat sdir = trial - g, ydir = next_grad - grad;
        const double sy = (sdir.array() * ydir.array()).sum();
        alpha = sy > 0 ? (sdir.array() * sdir.array()).sum() / sy : 2.0 * alpha;
        g = std::move(trial);
        f = ft;
        grad = std::move(next_grad);
        if (grad.norm() < best_norm) {
            best_norm = grad.norm();
            best = g;
        }
    }
    return expm_sym(best);
}

double sample_sup_error(const std::function<double(double)>& a, const std::function<double(double)>& b, double lo,
                        double hi, int samples) {
    if (!(lo > 0) || !(lo <= hi) || samples < 1) throw std::invalid_argument("invalid sampling domain");
    double sup = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double t = samples == 1 ? 0.0 : static_cast<double>(i) / (samples - 1);
        const double x = std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
        sup = std::max(sup, std::abs(a(x) - b(x)));
    }
    return sup;
}

}  // namespace spm::oracle
