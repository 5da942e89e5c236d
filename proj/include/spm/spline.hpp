#pragma once

#include <span>
#include <string>
#include <vector>

namespace spm {

// Clamped knot vector in the log-eigenvalue domain.
struct KnotGrid {
    int degree = 3;
    int intervals = 10;
    double lo = -15.0;
    double hi = 15.0;
    std::vector<double> knots;

    double spacing() const { return (hi - lo) / intervals; }
    int basis_count() const { return intervals + degree; }
};

KnotGrid build_grid(int degree = 3, int intervals = 10, double lo = -15.0, double hi = 15.0);

// Cox-de Boor recursion; 0/0 resolves to 0. The right end point belongs to the
// last non-empty span so the basis is a partition of unity on [t_0, t_last].
double basis_eval(std::span<const double> knots, int i, int k, double x);
double basis_eval(const KnotGrid& grid, int i, int k, double x);

// All degree-k basis values at x (size knots.size() - k - 1).
std::vector<double> basis_all(std::span<const double> knots, int k, double x);

struct MonotoneSplineParams {
    double c0_raw = 0.0;
    std::vector<double> step_weights;
    double min_step = 1e-4;
};

double softplus(double w);
double softplus_deriv(double w);
double softplus_inv(double s);

std::vector<double> control_points(const MonotoneSplineParams& params);

// Control points at the Greville abscissae of slope * y + offset, which the spline reproduces exactly.
MonotoneSplineParams init_affine(const KnotGrid& grid, double slope, double offset, double min_step = 1e-4);
MonotoneSplineParams init_identity(const KnotGrid& grid, double min_step = 1e-4);
MonotoneSplineParams init_random(const KnotGrid& grid, unsigned long long seed, double min_step = 1e-4);

// f(x) = S(log x) on the grid, linear in log x outside it.
class SplineCurve {
public:
    SplineCurve(KnotGrid grid, MonotoneSplineParams params);

    const KnotGrid& grid() const { return grid_; }
    const MonotoneSplineParams& params() const { return params_; }
    const std::vector<double>& control() const { return control_; }
    double slope_left() const { return m_left_; }
    double slope_right() const { return m_right_; }
    std::size_t param_count() const { return 1 + params_.step_weights.size(); }

    double eval(double x) const;
    double deriv(double x) const;
    double invert(double v) const;

    // Log-domain curve F(y) = f(exp y) and its derivatives.
    double eval_log(double y) const;
    double deriv_log(double y) const;
    double second_deriv_log(double y) const;
    double invert_log(double v) const;

    // Adds upstream * d f(x) / d(c0_raw, w_1..) into out (size param_count()).
    void grad_weights(double x, double upstream, std::span<double> out) const;
    std::vector<double> grad_weights(double x, double upstream) const;

    // Same for the log-domain derivative F'(y) at y = log x, i.e. x f'(x).
    void grad_deriv_log_weights(double y, double upstream, std::span<double> out) const;

    // Flattened parameters (c0_raw, w...) for optimizers.
    std::vector<double> flat_params() const;
    SplineCurve with_flat_params(std::span<const double> flat) const;

    std::string to_json() const;
    static SplineCurve from_json(const std::string& text);

private:
    void control_grad_to_params(std::span<const double> dc, std::span<double> out) const;
    std::vector<double> dbasis_all(double y) const;

    KnotGrid grid_;
    MonotoneSplineParams params_;
    std::vector<double> control_;
    double m_left_ = 1.0;
    double m_right_ = 1.0;
};

SplineCurve identity_curve(const KnotGrid& grid = build_grid());

}  // namespace spm
