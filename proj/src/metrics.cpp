#include "spm/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace spm {

PullbackMetric PullbackMetric::sspm(SplineCurve curve) { return {MetricKind::SSPM, std::move(curve), 1.0}; }
PullbackMetric PullbackMetric::cspm(SplineCurve curve) { return {MetricKind::CSPM, std::move(curve), 1.0}; }
PullbackMetric PullbackMetric::le() { return {MetricKind::LE, std::nullopt, 1.0}; }
PullbackMetric PullbackMetric::lc() { return {MetricKind::LC, std::nullopt, 1.0}; }

PullbackMetric PullbackMetric::pcm(double theta, bool allow_negative) {
    if (!std::isfinite(theta) || theta == 0.0 || (theta < 0 && !allow_negative))
        throw std::invalid_argument("PCM theta must be positive");
    return {MetricKind::PCM, std::nullopt, theta};
}

const SplineCurve& PullbackMetric::spline() const {
    if (!spline_) throw std::logic_error("metric has no spline");
    return *spline_;
}

PullbackMetric PullbackMetric::with_spline(SplineCurve curve) const {
    PullbackMetric m = *this;
    m.spline_ = std::move(curve);
    return m;
}

std::string PullbackMetric::name() const {
    switch (kind_) {
        case MetricKind::SSPM: return "sspm";
        case MetricKind::CSPM: return "cspm";
        case MetricKind::LE: return "le";
        case MetricKind::LC: return "lc";
        case MetricKind::PCM: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "pcm%g", theta_);
            return buf;
        }
    }
    return "?";
}

double PullbackMetric::scalar(double x) const {
    switch (kind_) {
        case MetricKind::SSPM:
        case MetricKind::CSPM: return spline_->eval(x);
        case MetricKind::LE:
        case MetricKind::LC: return std::log(x);
        case MetricKind::PCM: return (std::pow(x, theta_) - 1.0) / theta_;
    }
    return 0.0;
}

double PullbackMetric::scalar_deriv(double x) const {
    switch (kind_) {
        case MetricKind::SSPM:
        case MetricKind::CSPM: return spline_->deriv(x);
        case MetricKind::LE:
        case MetricKind::LC: return 1.0 / x;
        case MetricKind::PCM: return std::pow(x, theta_ - 1.0);
    }
    return 0.0;
}

double PullbackMetric::scalar_inv(double v) const {
    switch (kind_) {
        case MetricKind::SSPM:
        case MetricKind::CSPM: return spline_->invert(v);
        case MetricKind::LE:
        case MetricKind::LC: return std::exp(v);
        case MetricKind::PCM: {
            const double base = 1.0 + theta_ * v;
            if (!(base > 0)) throw std::domain_error("PCM inverse: value outside the image of the power map");
            return std::pow(base, 1.0 / theta_);
        }
    }
    return 0.0;
}

Mat strict_lower(const Mat& a) {
    Mat out = a.triangularView<Eigen::StrictlyLower>();
    return out;
}

Mat lower_half(const Mat& a) {
    Mat out = strict_lower(a);
    out.diagonal() = 0.5 * a.diagonal();
    return out;
}

Mat chol_differential(const Mat& l, const Mat& v) {
    auto lt = l.triangularView<Eigen::Lower>();
    Mat a = lt.solve(symmetrize(v));
    Mat m = lt.solve(a.transpose()).transpose();
    return l * lower_half(m);
}

Mat chol_adjoint(const Mat& l, const Mat& lbar) {
    Mat p = lower_half(l.transpose() * lbar);
    Mat ps = 0.5 * (p + p.transpose());
    auto ut = l.transpose().triangularView<Eigen::Upper>();
    Mat a = ut.solve(ps);
    Mat b = ut.solve(a.transpose()).transpose();
    return symmetrize(b);
}

Mat PullbackMetric::dk(const Vec& lam) const {
    const Eigen::Index n = lam.size();
    Mat k(n, n);
    Vec f(n);
    for (Eigen::Index i = 0; i < n; ++i) f(i) = scalar(lam(i));
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = scalar_deriv(lam(i));
        for (Eigen::Index j = 0; j < i; ++j) {
            if (lam(i) == lam(j)) throw std::invalid_argument("divided differences need distinct eigenvalues");
            k(i, j) = k(j, i) = (f(i) - f(j)) / (lam(i) - lam(j));
        }
    }
    return k;
}

Mat dk_matrix(const SplineCurve& curve, const Vec& lam) {
    return PullbackMetric::sspm(curve).dk(lam);
}

Prepared PullbackMetric::prepare(const Mat& s) const {
    Prepared p;
    if (spectral()) {
        auto ed = eig_sym(s, eig_jitter);
        p.u = std::move(ed.u);
        p.lam = perturb_spectrum(ed.eigenvalues, {delta});
    } else {
        p.l = chol_with_fallback(s, chol_jitter).l;
    }
    return p;
}

Mat PullbackMetric::forward_prepared(const Prepared& p) const {
    if (spectral()) {
        Vec f(p.lam.size());
        for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = scalar(p.lam(i));
        return symmetrize(p.u * f.asDiagonal() * p.u.transpose());
    }
    Mat x = strict_lower(p.l);
    for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, i) = scalar(p.l(i, i));
    return x;
}

void PullbackMetric::spline_grad_prepared(const Prepared& p, const Mat& upstream, std::span<double> out) const {
    if (!has_spline()) return;
    if (spectral()) {
        Mat m = p.u.transpose() * symmetrize(upstream) * p.u;
        for (Eigen::Index i = 0; i < p.lam.size(); ++i) spline_->grad_weights(p.lam(i), m(i, i), out);
    } else {
        for (Eigen::Index i = 0; i < p.l.rows(); ++i) spline_->grad_weights(p.l(i, i), upstream(i, i), out);
    }
}

Mat PullbackMetric::forward(const Mat& s) const { return forward_prepared(prepare(s)); }

Mat PullbackMetric::inverse(const Mat& x_in) const {
    if (!x_in.allFinite()) throw std::invalid_argument("inverse input has non-finite entries");
    const Eigen::Index n = x_in.rows();
    if (spectral()) {
        auto ed = eig_sym(symmetrize(x_in), 0.0);
        Vec lt(n), lam(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            lt(i) = scalar_inv(ed.eigenvalues(i));
            lam(i) = lt(i) - static_cast<double>(i + 1) * delta;
        }
        // Undo the spectral perturbation and the eigensolver jitter when the result stays SPD.
        if (lam.minCoeff() - static_cast<double>(n) * eig_jitter > 0) {
            Mat s = ed.u * lam.asDiagonal() * ed.u.transpose();
            for (Eigen::Index i = 0; i < n; ++i) s(i, i) -= static_cast<double>(i + 1) * eig_jitter;
            return symmetrize(s);
        }
        return symmetrize(ed.u * lt.asDiagonal() * ed.u.transpose());
    }
    if (x_in.rows() != x_in.cols()) throw std::invalid_argument("matrix must be square");
    Mat l = strict_lower(x_in);
    for (Eigen::Index i = 0; i < n; ++i) l(i, i) = scalar_inv(x_in(i, i));
    Mat s = l * l.transpose();
    if (chol_jitter > 0) {
        Mat shifted = s - chol_jitter * Mat::Identity(n, n);
        Eigen::LLT<Mat> check(shifted);
        if (check.info() == Eigen::Success) return symmetrize(shifted);
    }
    return symmetrize(s);
}

MetricGradients PullbackMetric::backward(const Mat& s, const Mat& upstream) const {
    Prepared p = prepare(s);
    MetricGradients g;
    if (has_spline()) g.grad_spline.assign(spline_->param_count(), 0.0);
    if (spectral()) {
        Mat k = dk(p.lam);
        Mat m = p.u.transpose() * symmetrize(upstream) * p.u;
        g.grad_input = symmetrize(p.u * k.cwiseProduct(m) * p.u.transpose());
    } else {
        Mat lbar = strict_lower(upstream);
        for (Eigen::Index i = 0; i < lbar.rows(); ++i) lbar(i, i) = upstream(i, i) * scalar_deriv(p.l(i, i));
        g.grad_input = chol_adjoint(p.l, lbar);
    }
    if (has_spline()) spline_grad_prepared(p, upstream, g.grad_spline);
    return g;
}

Mat PullbackMetric::differential(const Mat& pt, const Mat& v) const {
    Prepared p = prepare(pt);
    if (spectral()) {
        Mat k = dk(p.lam);
        return symmetrize(p.u * k.cwiseProduct(p.u.transpose() * symmetrize(v) * p.u) * p.u.transpose());
    }
    Mat dl = chol_differential(p.l, v);
    for (Eigen::Index i = 0; i < dl.rows(); ++i) dl(i, i) *= scalar_deriv(p.l(i, i));
    return dl;
}

Mat PullbackMetric::differential_inverse(const Mat& pt, const Mat& w) const {
    Prepared p = prepare(pt);
    if (spectral()) {
        Mat k = dk(p.lam);
        if (!(k.minCoeff() > 0)) throw NumericError("divided-difference matrix is not positive");
        return symmetrize(p.u * (p.u.transpose() * symmetrize(w) * p.u).cwiseQuotient(k) * p.u.transpose());
    }
    Mat dl = strict_lower(w);
    for (Eigen::Index i = 0; i < dl.rows(); ++i) dl(i, i) = w(i, i) / scalar_deriv(p.l(i, i));
    Mat phi = p.l.triangularView<Eigen::Lower>().solve(dl);
    Mat m = strict_lower(phi);
    m += m.transpose().eval();
    m.diagonal() = 2.0 * phi.diagonal();
    return symmetrize(p.l * m * p.l.transpose());
}

double airm_distance(const Mat& p, const Mat& q) {
    if (p.rows() != q.rows() || p.cols() != q.cols()) throw std::invalid_argument("dimension mismatch");
    auto ep = eig_sym(p, 0.0);
    if (!(ep.eigenvalues.minCoeff() > 0)) throw std::invalid_argument("matrix is not positive definite");
    Vec isq = ep.eigenvalues.cwiseSqrt().cwiseInverse();
    Mat w = ep.u * isq.asDiagonal() * ep.u.transpose();
    auto ew = eig_sym(symmetrize(w * q * w), 0.0);
    double s = 0.0;
    for (Eigen::Index i = 0; i < ew.eigenvalues.size(); ++i) {
        double lg = std::log(ew.eigenvalues(i));
        s += lg * lg;
    }
    return std::sqrt(s);
}

AlemCounterexample alem_counterexample(const SplineCurve& curve) {
    AlemCounterexample a;
    a.s = 2.0 * Mat::Identity(2, 2);
    a.u1 = Mat::Identity(2, 2);
    a.u2.resize(2, 2);
    const double r = 1.0 / std::sqrt(2.0);
    a.u2 << r, -r, r, r;
    Mat rank_values = Vec::LinSpaced(2, 1.0, 2.0).asDiagonal();
    a.y1 = a.u1 * rank_values * a.u1.transpose();
    a.y2 = a.u2 * rank_values * a.u2.transpose();
    const double c = curve.eval(2.0);
    Mat spectral = Vec::Constant(2, c).asDiagonal();
    a.sspm_u1 = a.u1 * spectral * a.u1.transpose();
    a.sspm_u2 = a.u2 * spectral * a.u2.transpose();
    return a;
}

PullbackMetric parse_metric(const std::string& spec, const SplineCurve& curve, bool allow_negative_theta) {
    if (spec == "sspm") return PullbackMetric::sspm(curve);
    if (spec == "cspm") return PullbackMetric::cspm(curve);
    if (spec == "le") return PullbackMetric::le();
    if (spec == "lc") return PullbackMetric::lc();
    if (spec.rfind("pcm", 0) == 0) {
        std::string rest = spec.substr(3);
        double theta = 0.5;
        if (!rest.empty()) {
            std::size_t used = 0;
            theta = std::stod(rest, &used);
            if (used != rest.size()) throw std::invalid_argument("bad PCM theta: " + spec);
        }
        return PullbackMetric::pcm(theta, allow_negative_theta);
    }
    throw std::invalid_argument("unknown metric: " + spec);
}

}  // namespace spm
