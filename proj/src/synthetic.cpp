#include "spm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace spm {

namespace {

void check_interval(const Interval& iv) {
    if (!(iv.lo > 0) || !(iv.lo <= iv.hi)) throw std::invalid_argument("band intervals must be positive and ordered");
}

void check_inside(const Interval& sub, const Interval& band) {
    check_interval(sub);
    if (sub.lo < band.lo || sub.hi > band.hi) throw std::invalid_argument("class interval outside its band");
}

double draw(const Interval& iv, bool log_uniform, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    const double u = ud(rng);
    if (log_uniform) return std::exp(std::log(iv.lo) + u * (std::log(iv.hi) - std::log(iv.lo)));
    return iv.lo + u * (iv.hi - iv.lo);
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

void BandSpec::validate() const {
    const Interval* bands[] = {&low_noise, &low_signal, &high_noise, &high_signal};
    for (int i = 0; i < 4; ++i) {
        check_interval(*bands[i]);
        if (i > 0 && bands[i]->lo < bands[i - 1]->hi) throw std::invalid_argument("bands must be ordered and disjoint");
    }
    for (int c = 0; c < 2; ++c) {
        check_inside(low_signal_class[c], low_signal);
        check_inside(high_signal_class[c], high_signal);
    }
}

BandSpec BandSpec::canonical(double gap) {
    if (!(gap >= 0 && gap < 1)) throw std::invalid_argument("gap must lie in [0, 1)");
    BandSpec s;
    const double lo = std::log(s.high_signal.lo), hi = std::log(s.high_signal.hi);
    const double half = 0.5 * (1.0 - gap) * (hi - lo);
    s.high_signal_class[0] = {s.high_signal.lo, std::exp(lo + half)};
    s.high_signal_class[1] = {std::exp(hi - half), s.high_signal.hi};
    return s;
}

BandSpec BandSpec::halves() {
    BandSpec s;
    s.low_noise = {0.1, 2.0};
    s.low_signal = {2.0, 12.0};
    s.high_noise = {12.0, 25.0};
    s.high_signal = {25.0, 50.0};
    s.low_signal_class = {{{2.0, 7.0}, {7.0, 12.0}}};
    s.high_signal_class = {{{25.0, 37.5}, {37.5, 50.0}}};
    s.log_uniform = false;
    return s;
}

LabeledSpdDataset gen_bands_dataset(int count, int dim, const BandSpec& spec, unsigned long long seed) {
    if (count < 2 || dim < 1) throw std::invalid_argument("count and dim must be positive");
    spec.validate();
    std::mt19937_64 rng(seed);
    LabeledSpdDataset d;
    d.matrices.reserve(count);
    d.labels.reserve(count);
    for (int s = 0; s < count; ++s) {
        const int label = s % 2;
        Vec lam(dim);
        for (int j = 0; j < dim; ++j) {
            switch (j % 4) {
                case 0: lam(j) = draw(spec.low_noise, spec.log_uniform, rng); break;
                case 1: lam(j) = draw(spec.low_signal_class[label], spec.log_uniform, rng); break;
                case 2: lam(j) = draw(spec.high_noise, spec.log_uniform, rng); break;
                default: lam(j) = draw(spec.high_signal_class[label], spec.log_uniform, rng); break;
            }
        }
        Mat u = random_orthogonal(dim, rng);
        d.matrices.push_back(symmetrize(u * lam.asDiagonal() * u.transpose()));
        d.labels.push_back(label);
    }
    return d;
}

TargetKind parse_target_kind(const std::string& name) {
    if (name == "monotone_inflected") return TargetKind::MonotoneInflected;
    if (name == "adversarial_nonmonotone") return TargetKind::AdversarialNonmonotone;
    if (name == "outlier_capping") return TargetKind::OutlierCapping;
    throw std::invalid_argument("unknown target kind: " + name);
}

std::string target_kind_name(TargetKind kind) {
    switch (kind) {
        case TargetKind::MonotoneInflected: return "monotone_inflected";
        case TargetKind::AdversarialNonmonotone: return "adversarial_nonmonotone";
        case TargetKind::OutlierCapping: return "outlier_capping";
    }
    return "?";
}

// monotone_inflected: 0.25 t + 1.2 tanh((t+3)/5) + 1.2 tanh((t-4)/5)
// adversarial_nonmonotone: t - 2.5 exp(-(t-1)^2 / 2)
// outlier_capping: 2 - softplus(2 - t)
double target_value_log(TargetKind kind, double t) {
    switch (kind) {
        case TargetKind::MonotoneInflected: return 0.25 * t + 1.2 * std::tanh((t + 3.0) / 5.0) + 1.2 * std::tanh((t - 4.0) / 5.0);
        case TargetKind::AdversarialNonmonotone: return t - 2.5 * std::exp(-0.5 * (t - 1.0) * (t - 1.0));
        case TargetKind::OutlierCapping: return 2.0 - softplus(2.0 - t);
    }
    return 0.0;
}

double target_slope_log(TargetKind kind, double t) {
    switch (kind) {
        case TargetKind::MonotoneInflected: {
            const double a = std::cosh((t + 3.0) / 5.0), b = std::cosh((t - 4.0) / 5.0);
            return 0.25 + 0.24 / (a * a) + 0.24 / (b * b);
        }
        case TargetKind::AdversarialNonmonotone: return 1.0 + 2.5 * (t - 1.0) * std::exp(-0.5 * (t - 1.0) * (t - 1.0));
        case TargetKind::OutlierCapping: return sigmoid(2.0 - t);
    }
    return 0.0;
}

Target1D gen_target_1d(TargetKind kind, int points) {
    if (points < 16) throw std::invalid_argument("need at least 16 points");
    Target1D t{kind, {}, {}};
    for (int i = 0; i < points; ++i) {
        const double lt = kTargetLogLo + (kTargetLogHi - kTargetLogLo) * i / (points - 1);
        t.x.push_back(std::exp(lt));
        t.y.push_back(target_value_log(kind, lt));
    }
    return t;
}

Fit1D fit_spline_1d(const Target1D& target, const KnotGrid& grid, const TrainConfig& config, int steps) {
    const double n = static_cast<double>(target.x.size());
    double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
    for (std::size_t j = 0; j < target.x.size(); ++j) {
        const double t = std::log(target.x[j]);
        st += t;
        sy += target.y[j];
        stt += t * t;
        sty += t * target.y[j];
    }
    const double slope = std::max((n * sty - st * sy) / (n * stt - st * st), kMinFitSlope);
    SplineCurve curve(grid, init_affine(grid, slope, (sy - slope * st) / n));
    std::vector<double> params = curve.flat_params();
    AdamState adam;
    TrainConfig cfg = config;
    const double inv_n = 1.0 / n;
    for (int step = 0; step < steps; ++step) {
        std::vector<double> grad(params.size(), 0.0);
        for (std::size_t j = 0; j < target.x.size(); ++j) {
            const double r = curve.eval(target.x[j]) - target.y[j];
            curve.grad_weights(target.x[j], 2.0 * r * inv_n, grad);
        }
        clip_global_norm(grad, cfg.clip_norm);
        adam_step(adam, params, grad, cfg);
        curve = curve.with_flat_params(params);
    }

    double sup = 0.0;
    for (std::size_t j = 0; j < target.x.size(); ++j) sup = std::max(sup, std::abs(curve.eval(target.x[j]) - target.y[j]));

    double min_d = std::numeric_limits<double>::infinity();
    double cap_max = 0.0, sig_min = std::numeric_limits<double>::infinity();
    int inflections = 0, last_sign = 0;
    const int dense = 4000;
    for (int i = 0; i < dense; ++i) {
        const double t = kTargetLogLo + (kTargetLogHi - kTargetLogLo) * i / (dense - 1);
        min_d = std::min(min_d, curve.deriv(std::exp(t)));
        const double slope = curve.deriv_log(t);
        if (t >= kCapPointLog) cap_max = std::max(cap_max, slope);
        if (t <= kSignalEndLog) sig_min = std::min(sig_min, slope);
        const double c2 = curve.second_deriv_log(t);
        const int sign = c2 > 1e-9 ? 1 : (c2 < -1e-9 ? -1 : 0);
        if (sign != 0) {
            if (last_sign != 0 && sign != last_sign) ++inflections;
            last_sign = sign;
        }
    }
    return Fit1D{curve, sup, min_d, cap_max / sig_min, inflections};
}

SplineCurve fit_spline_lsq(const std::vector<double>& log_x, const std::vector<double>& values,
                           const std::vector<double>& weights, const KnotGrid& grid, int iterations) {
    if (log_x.size() != values.size() || log_x.size() != weights.size()) throw std::invalid_argument("sample size mismatch");
    SplineCurve curve = identity_curve(grid);
    const std::size_t m = log_x.size();
    const Eigen::Index np = static_cast<Eigen::Index>(curve.param_count());
    auto residuals = [&](const SplineCurve& c) {
        Vec r(m);
        for (std::size_t j = 0; j < m; ++j) r(j) = weights[j] * (c.eval_log(log_x[j]) - values[j]);
        return r;
    };
    Vec r = residuals(curve);
    double cost = r.squaredNorm();
    double mu = 1e-3;
    for (int it = 0; it < iterations; ++it) {
        Mat jac(m, np);
        for (std::size_t j = 0; j < m; ++j) {
            auto g = curve.grad_weights(std::exp(log_x[j]), weights[j]);
            for (Eigen::Index k = 0; k < np; ++k) jac(j, k) = g[k];
        }
        Mat jtj = jac.transpose() * jac;
        Vec jtr = jac.transpose() * r;
        bool improved = false;
        for (int tries = 0; tries < 30 && !improved; ++tries) {
            Mat a = jtj;
            a.diagonal() += mu * (jtj.diagonal().array() + 1e-12).matrix();
            Vec step = a.ldlt().solve(-jtr);
            auto flat = curve.flat_params();
            for (Eigen::Index k = 0; k < np; ++k) flat[k] += step(k);
            SplineCurve trial = curve.with_flat_params(flat);
            Vec rt = residuals(trial);
            const double ct = rt.squaredNorm();
            if (ct < cost) {
                const double gain = cost - ct;
                curve = std::move(trial);
                r = std::move(rt);
                cost = ct;
                mu = std::max(mu / 3.0, 1e-12);
                improved = true;
                if (gain <= 1e-15 * std::max(cost, 1e-30)) return curve;
            } else {
                mu *= 4.0;
            }
        }
        if (!improved) break;
    }
    return curve;
}

}  // namespace spm
