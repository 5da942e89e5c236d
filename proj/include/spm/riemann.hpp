#pragma once

#include <vector>

#include "spm/metrics.hpp"

namespace spm {

struct TangentVector {
    Mat base;
    Mat value;  // symmetric
};

struct MlrHead {
    std::vector<Mat> weights;  // A_k in flat space
    std::vector<Mat> anchors;  // phi(P_k); zero when anchor-free
    int class_count() const { return static_cast<int>(weights.size()); }
};

double distance(const PullbackMetric& metric, const Mat& p, const Mat& q);
Mat geodesic(const PullbackMetric& metric, const Mat& p, const Mat& q, double t);
TangentVector log_map(const PullbackMetric& metric, const Mat& p, const Mat& q);
Mat exp_map(const PullbackMetric& metric, const TangentVector& tv);

// Riemannian norm at the base point: ||D phi(V)||_F.
double tangent_norm(const PullbackMetric& metric, const TangentVector& tv);

Mat frechet_mean(const PullbackMetric& metric, const std::vector<Mat>& points, const std::vector<double>& weights);
Mat frechet_mean(const PullbackMetric& metric, const std::vector<Mat>& points);
double frechet_objective(const PullbackMetric& metric, const Mat& m, const std::vector<Mat>& points,
                         const std::vector<double>& weights);

TangentVector parallel_transport(const PullbackMetric& metric, const TangentVector& tv, const Mat& b);

std::vector<double> mlr_logits(const PullbackMetric& metric, const MlrHead& head, const Mat& x);

}  // namespace spm
