#include "spm/riemann.hpp"

#include <cmath>
#include <stdexcept>

namespace spm {

namespace {

void same_dims(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("dimension mismatch");
}

}  // namespace

double distance(const PullbackMetric& metric, const Mat& p, const Mat& q) {
    same_dims(p, q);
    return (metric.forward(p) - metric.forward(q)).norm();
}

Mat geodesic(const PullbackMetric& metric, const Mat& p, const Mat& q, double t) {
    same_dims(p, q);
    return metric.inverse((1.0 - t) * metric.forward(p) + t * metric.forward(q));
}

TangentVector log_map(const PullbackMetric& metric, const Mat& p, const Mat& q) {
    same_dims(p, q);
    return {p, metric.differential_inverse(p, metric.forward(q) - metric.forward(p))};
}

Mat exp_map(const PullbackMetric& metric, const TangentVector& tv) {
    same_dims(tv.base, tv.value);
    return metric.inverse(metric.forward(tv.base) + metric.differential(tv.base, tv.value));
}

double tangent_norm(const PullbackMetric& metric, const TangentVector& tv) {
    return metric.differential(tv.base, tv.value).norm();
}

Mat frechet_mean(const PullbackMetric& metric, const std::vector<Mat>& points, const std::vector<double>& weights) {
    if (points.empty()) throw std::invalid_argument("empty point set");
    if (weights.size() != points.size()) throw std::invalid_argument("weight count mismatch");
    double total = 0.0;
    for (double w : weights) {
        if (!(w > 0)) throw std::invalid_argument("weights must be positive");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("weights must sum to one");
    Mat acc = Mat::Zero(points[0].rows(), points[0].cols());
    for (std::size_t i = 0; i < points.size(); ++i) {
        same_dims(points[0], points[i]);
        acc += weights[i] * metric.forward(points[i]);
    }
    return metric.inverse(acc);
}

Mat frechet_mean(const PullbackMetric& metric, const std::vector<Mat>& points) {
    std::vector<double> w(points.size(), 1.0 / static_cast<double>(points.size()));
    return frechet_mean(metric, points, w);
}

double frechet_objective(const PullbackMetric& metric, const Mat& m, const std::vector<Mat>& points,
                         const std::vector<double>& weights) {
    double s = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        double d = distance(metric, m, points[i]);
        s += weights[i] * d * d;
    }
    return s;
}

TangentVector parallel_transport(const PullbackMetric& metric, const TangentVector& tv, const Mat& b) {
    same_dims(tv.base, b);
    return {b, metric.differential_inverse(b, metric.differential(tv.base, tv.value))};
}

std::vector<double> mlr_logits(const PullbackMetric& metric, const MlrHead& head, const Mat& x) {
    if (head.anchors.size() != head.weights.size()) throw std::invalid_argument("anchor count mismatch");
    Mat fx = metric.forward(x);
    std::vector<double> out;
    out.reserve(head.weights.size());
    for (std::size_t k = 0; k < head.weights.size(); ++k) {
        same_dims(fx, head.weights[k]);
        same_dims(fx, head.anchors[k]);
        out.push_back((head.weights[k].array() * (fx - head.anchors[k]).array()).sum());
    }
    return out;
}

}  // namespace spm
