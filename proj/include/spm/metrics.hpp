#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spm/spd_core.hpp"
#include "spm/spline.hpp"

namespace spm {

enum class MetricKind { SSPM, CSPM, LE, LC, PCM };

struct MetricGradients {
    Mat grad_input;                   // symmetric
    std::vector<double> grad_spline;  // empty for fixed metrics
};

// Factorization of one input, reusable while only the scalar map changes.
struct Prepared {
    Mat u;          // spectral kinds: eigenvectors of the jittered input
    Vec lam;        // spectral kinds: perturbed ascending spectrum
    Mat l;          // Cholesky kinds: factor of s + jitter*I
};

class PullbackMetric {
public:
    static PullbackMetric sspm(SplineCurve curve);
    static PullbackMetric cspm(SplineCurve curve);
    static PullbackMetric le();
    static PullbackMetric lc();
    static PullbackMetric pcm(double theta, bool allow_negative = false);

    MetricKind kind() const { return kind_; }
    bool spectral() const { return kind_ == MetricKind::SSPM || kind_ == MetricKind::LE; }
    bool has_spline() const { return spline_.has_value(); }
    const SplineCurve& spline() const;
    double theta() const { return theta_; }
    std::string name() const;

    PullbackMetric with_spline(SplineCurve curve) const;

    double eig_jitter = kEigJitter;
    double delta = 1e-8;
    double chol_jitter = kCholJitter;

    // Scalar generator applied to eigenvalues or Cholesky diagonals.
    double scalar(double x) const;
    double scalar_deriv(double x) const;
    double scalar_inv(double v) const;

    Prepared prepare(const Mat& s) const;
    Mat forward_prepared(const Prepared& p) const;
    // Adds d<upstream, phi(S)>/d theta into out using the prepared factorization.
    void spline_grad_prepared(const Prepared& p, const Mat& upstream, std::span<double> out) const;

    Mat forward(const Mat& s) const;
    Mat inverse(const Mat& x) const;
    MetricGradients backward(const Mat& s, const Mat& upstream) const;

    // Pushforward D phi_P and its inverse.
    Mat differential(const Mat& p, const Mat& v) const;
    Mat differential_inverse(const Mat& p, const Mat& w) const;

    // Divided differences of the scalar map over a strictly increasing spectrum.
    Mat dk(const Vec& lam) const;

private:
    PullbackMetric(MetricKind kind, std::optional<SplineCurve> curve, double theta)
        : kind_(kind), spline_(std::move(curve)), theta_(theta) {}

    MetricKind kind_;
    std::optional<SplineCurve> spline_;
    double theta_ = 1.0;
};

// Daleckii-Krein divided differences of the spline over a strictly increasing spectrum.
Mat dk_matrix(const SplineCurve& curve, const Vec& perturbed_eigs);

// Strict lower part plus the halved diagonal.
Mat lower_half(const Mat& a);
Mat strict_lower(const Mat& a);

// d L for L = chol(S) in direction V.
Mat chol_differential(const Mat& l, const Mat& v);
// Reverse-mode adjoint of L = chol(S): symmetric gradient wrt S from dL/dL-bar.
Mat chol_adjoint(const Mat& l, const Mat& lbar);

double airm_distance(const Mat& p, const Mat& q);

struct AlemCounterexample {
    Mat s;
    Mat u1, u2;
    Mat y1, y2;
    Mat sspm_u1, sspm_u2;
};

AlemCounterexample alem_counterexample(const SplineCurve& curve = identity_curve());

PullbackMetric parse_metric(const std::string& spec, const SplineCurve& curve, bool allow_negative_theta = false);

}  // namespace spm
