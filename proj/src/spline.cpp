#include "spm/spline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace spm {

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

int last_nonempty_span(std::span<const double> t) {
    for (int j = static_cast<int>(t.size()) - 2; j >= 0; --j)
        if (t[j] < t[j + 1]) return j;
    return -1;
}

double safe_ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

// Derivatives of order r of all degree-k basis functions.
std::vector<double> basis_deriv_all(std::span<const double> t, int k, int r, double x) {
    if (r == 0) return basis_all(t, k, x);
    auto lower = basis_deriv_all(t, k - 1, r - 1, x);
    const int n = static_cast<int>(t.size()) - k - 1;
    std::vector<double> out(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double a = safe_ratio(lower[i], t[i + k] - t[i]);
        double b = safe_ratio(lower[i + 1], t[i + k + 1] - t[i + 1]);
        out[i] = k * (a - b);
    }
    return out;
}

}  // namespace

KnotGrid build_grid(int degree, int intervals, double lo, double hi) {
    if (degree < 1 || intervals < 1) throw std::invalid_argument("grid sizes must be positive");
    if (!(lo < hi)) throw std::invalid_argument("grid range must be ordered");
    KnotGrid g;
    g.degree = degree;
    g.intervals = intervals;
    g.lo = lo;
    g.hi = hi;
    const double h = (hi - lo) / intervals;
    g.knots.reserve(intervals + 1 + 2 * degree);
    for (int i = 0; i < degree; ++i) g.knots.push_back(lo);
    for (int i = 0; i <= intervals; ++i) g.knots.push_back(i == intervals ? hi : lo + i * h);
    for (int i = 0; i < degree; ++i) g.knots.push_back(hi);
    return g;
}

double basis_eval(std::span<const double> t, int i, int k, double x) {
    const int n = static_cast<int>(t.size()) - k - 1;
    if (k < 0 || i < 0 || i >= n) throw std::out_of_range("basis index out of range");
    if (k == 0) {
        if (t[i] <= x && x < t[i + 1]) return 1.0;
        if (x == t.back() && i == last_nonempty_span(t)) return 1.0;
        return 0.0;
    }
    double left = 0.0, right = 0.0;
    if (t[i + k] != t[i]) left = (x - t[i]) / (t[i + k] - t[i]) * basis_eval(t, i, k - 1, x);
    if (t[i + k + 1] != t[i + 1])
        right = (t[i + k + 1] - x) / (t[i + k + 1] - t[i + 1]) * basis_eval(t, i + 1, k - 1, x);
    return left + right;
}

double basis_eval(const KnotGrid& grid, int i, int k, double x) { return basis_eval(grid.knots, i, k, x); }

std::vector<double> basis_all(std::span<const double> t, int k, double x) {
    const int m = static_cast<int>(t.size());
    std::vector<double> b(m - 1, 0.0);
    if (x == t.back()) {
        int j = last_nonempty_span(t);
        if (j >= 0) b[j] = 1.0;
    } else {
        for (int j = 0; j < m - 1; ++j)
            if (t[j] <= x && x < t[j + 1]) b[j] = 1.0;
    }
    for (int d = 1; d <= k; ++d) {
        const int n = m - 1 - d;
        for (int i = 0; i < n; ++i) {
            double v = 0.0;
            if (t[i + d] != t[i]) v += (x - t[i]) / (t[i + d] - t[i]) * b[i];
            if (t[i + d + 1] != t[i + 1]) v += (t[i + d + 1] - x) / (t[i + d + 1] - t[i + 1]) * b[i + 1];
            b[i] = v;
        }
        b.resize(n);
    }
    return b;
}

double softplus(double w) { return std::max(w, 0.0) + std::log1p(std::exp(-std::abs(w))); }

double softplus_deriv(double w) {
    if (w >= 0) return 1.0 / (1.0 + std::exp(-w));
    double e = std::exp(w);
    return e / (1.0 + e);
}

double softplus_inv(double s) {
    if (!(s > 0)) throw std::invalid_argument("softplus inverse needs a positive argument");
    if (s > 30.0) return s + std::log1p(-std::exp(-s));
    return std::log(std::expm1(s));
}

std::vector<double> control_points(const MonotoneSplineParams& p) {
    std::vector<double> c(p.step_weights.size() + 1);
    c[0] = p.c0_raw;
    for (std::size_t i = 0; i < p.step_weights.size(); ++i) c[i + 1] = c[i] + softplus(p.step_weights[i]) + p.min_step;
    return c;
}

MonotoneSplineParams init_affine(const KnotGrid& grid, double slope, double offset, double min_step) {
    const int n = grid.basis_count();
    const int k = grid.degree;
    std::vector<double> greville(n);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 1; j <= k; ++j) s += grid.knots[i + j];
        greville[i] = s / k;
    }
    MonotoneSplineParams p;
    p.c0_raw = slope * grid.lo + offset;
    p.min_step = min_step;
    p.step_weights.resize(n - 1);
    for (int i = 1; i < n; ++i) {
        const double step = slope * (greville[i] - greville[i - 1]) - min_step;
        if (!(step > 0)) throw std::invalid_argument("slope too small for the minimum control step");
        p.step_weights[i - 1] = softplus_inv(step);
    }
    return p;
}

MonotoneSplineParams init_identity(const KnotGrid& grid, double min_step) { return init_affine(grid, 1.0, 0.0, min_step); }

MonotoneSplineParams init_random(const KnotGrid& grid, unsigned long long seed, double min_step) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    MonotoneSplineParams p;
    p.c0_raw = grid.lo;
    p.min_step = min_step;
    p.step_weights.resize(grid.basis_count() - 1);
    for (auto& w : p.step_weights) w = nd(rng);
    return p;
}

SplineCurve::SplineCurve(KnotGrid grid, MonotoneSplineParams params) : grid_(std::move(grid)), params_(std::move(params)) {
    if (!(params_.min_step > 0)) throw std::invalid_argument("min_step must be positive");
    if (static_cast<int>(params_.step_weights.size()) != grid_.basis_count() - 1)
        throw std::invalid_argument("step weight count does not match the grid");
    control_ = control_points(params_);
    m_left_ = deriv_log(grid_.lo);
    m_right_ = deriv_log(grid_.hi);
}

double SplineCurve::eval_log(double y) const {
    if (y < grid_.lo) return control_.front() + m_left_ * (y - grid_.lo);
    if (y > grid_.hi) return control_.back() + m_right_ * (y - grid_.hi);
    auto b = basis_all(grid_.knots, grid_.degree, y);
    double s = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) s += control_[i] * b[i];
    return s;
}

std::vector<double> SplineCurve::dbasis_all(double y) const { return basis_deriv_all(grid_.knots, grid_.degree, 1, y); }

double SplineCurve::deriv_log(double y) const {
    if (y < grid_.lo) return m_left_;
    if (y > grid_.hi) return m_right_;
    auto d = dbasis_all(y);
    double s = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) s += control_[i] * d[i];
    return s;
}

double SplineCurve::second_deriv_log(double y) const {
    if (y < grid_.lo || y > grid_.hi) return 0.0;
    auto d = basis_deriv_all(grid_.knots, grid_.degree, 2, y);
    double s = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) s += control_[i] * d[i];
    return s;
}

double SplineCurve::eval(double x) const {
    if (!(x > 0)) throw std::domain_error("spline argument must be positive");
    return eval_log(std::log(x));
}

double SplineCurve::deriv(double x) const {
    if (!(x > 0)) throw std::domain_error("spline argument must be positive");
    return deriv_log(std::log(x)) / x;
}

double SplineCurve::invert_log(double v) const {
    const double s_lo = control_.front();
    const double s_hi = control_.back();
    if (v <= s_lo) return grid_.lo + (v - s_lo) / m_left_;
    if (v >= s_hi) return grid_.hi + (v - s_hi) / m_right_;
    double a = grid_.lo, b = grid_.hi;
    for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (a + b);
        if (eval_log(mid) < v) a = mid;
        else b = mid;
    }
    double y = 0.5 * (a + b);
    const double tol = 1e-12 * std::max(1.0, std::abs(v));
    for (int it = 0; it < 5; ++it) {
        double r = eval_log(y) - v;
        if (std::abs(r) <= tol) break;
        double d = deriv_log(y);
        if (!(d > 0)) break;
        double next = y - r / d;
        if (next < grid_.lo || next > grid_.hi) break;
        y = next;
    }
    return y;
}

double SplineCurve::invert(double v) const { return std::exp(invert_log(v)); }

void SplineCurve::control_grad_to_params(std::span<const double> dc, std::span<double> out) const {
    const std::size_t n = dc.size();
    double tail = 0.0;
    for (std::size_t i = n; i-- > 1;) {
        tail += dc[i];
        out[i] += softplus_deriv(params_.step_weights[i - 1]) * tail;
    }
    out[0] += tail + dc[0];
}

void SplineCurve::grad_weights(double x, double upstream, std::span<double> out) const {
    if (!(x > 0)) throw std::domain_error("spline argument must be positive");
    if (out.size() != param_count()) throw std::invalid_argument("gradient buffer size mismatch");
    const double y = std::log(x);
    std::vector<double> dc;
    if (y < grid_.lo || y > grid_.hi) {
        const double edge = y < grid_.lo ? grid_.lo : grid_.hi;
        dc = basis_all(grid_.knots, grid_.degree, edge);
        auto d = dbasis_all(edge);
        for (std::size_t i = 0; i < dc.size(); ++i) dc[i] = upstream * (dc[i] + d[i] * (y - edge));
    } else {
        dc = basis_all(grid_.knots, grid_.degree, y);
        for (auto& v : dc) v *= upstream;
    }
    control_grad_to_params(dc, out);
}

std::vector<double> SplineCurve::grad_weights(double x, double upstream) const {
    std::vector<double> g(param_count(), 0.0);
    grad_weights(x, upstream, g);
    return g;
}

void SplineCurve::grad_deriv_log_weights(double y, double upstream, std::span<double> out) const {
    if (out.size() != param_count()) throw std::invalid_argument("gradient buffer size mismatch");
    auto d = dbasis_all(std::clamp(y, grid_.lo, grid_.hi));
    for (auto& v : d) v *= upstream;
    control_grad_to_params(d, out);
}

std::vector<double> SplineCurve::flat_params() const {
    std::vector<double> p;
    p.reserve(param_count());
    p.push_back(params_.c0_raw);
    p.insert(p.end(), params_.step_weights.begin(), params_.step_weights.end());
    return p;
}

SplineCurve SplineCurve::with_flat_params(std::span<const double> flat) const {
    if (flat.size() != param_count()) throw std::invalid_argument("parameter count mismatch");
    MonotoneSplineParams p = params_;
    p.c0_raw = flat[0];
    std::copy(flat.begin() + 1, flat.end(), p.step_weights.begin());
    return SplineCurve(grid_, std::move(p));
}

std::string SplineCurve::to_json() const {
    std::ostringstream os;
    os << "{\"degree\": " << grid_.degree << ", \"interior_intervals\": " << grid_.intervals << ", \"range\": ["
       << fmt17(grid_.lo) << ", " << fmt17(grid_.hi) << "], \"c0_raw\": " << fmt17(params_.c0_raw)
       << ", \"step_weights\": [";
    for (std::size_t i = 0; i < params_.step_weights.size(); ++i)
        os << (i ? ", " : "") << fmt17(params_.step_weights[i]);
    os << "], \"min_step\": " << fmt17(params_.min_step) << "}";
    return os.str();
}

SplineCurve SplineCurve::from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    auto range = j.at("range");
    if (!range.is_array() || range.size() != 2) throw std::invalid_argument("range must be a pair");
    KnotGrid g = build_grid(j.at("degree").get<int>(), j.at("interior_intervals").get<int>(), range[0].get<double>(),
                            range[1].get<double>());
    MonotoneSplineParams p;
    p.c0_raw = j.at("c0_raw").get<double>();
    p.step_weights = j.at("step_weights").get<std::vector<double>>();
    p.min_step = j.at("min_step").get<double>();
    return SplineCurve(std::move(g), std::move(p));
}

SplineCurve identity_curve(const KnotGrid& grid) { return SplineCurve(grid, init_identity(grid)); }

}  // namespace spm
