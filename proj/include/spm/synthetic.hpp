#pragma once

#include <array>
#include <string>
#include <vector>

#include "spm/learn.hpp"
#include "spm/spline.hpp"

namespace spm {

struct Interval {
    double lo = 0.0, hi = 0.0;
};

// Four eigenvalue bands in ascending order; signal bands carry one sub-interval per class.
struct BandSpec {
    Interval low_noise{0.1, 1.86};
    Interval low_signal{1.86, 6.56};
    Interval high_noise{9.99, 14.5};
    Interval high_signal{14.5, 52.1};
    std::array<Interval, 2> low_signal_class{{{1.86, 6.56}, {1.86, 6.56}}};
    std::array<Interval, 2> high_signal_class{{{14.5, 14.5}, {52.1, 52.1}}};
    bool log_uniform = true;

    void validate() const;

    // Benchmark layout: class-free low signal band, class ends of the high signal band
    // separated by `gap` (fraction of its log-width).
    static BandSpec canonical(double gap = 0.903);
    // Halves of [2,12] and [25,50], uniform sampling.
    static BandSpec halves();
};

LabeledSpdDataset gen_bands_dataset(int count, int dim, const BandSpec& spec, unsigned long long seed);

enum class TargetKind { MonotoneInflected, AdversarialNonmonotone, OutlierCapping };

TargetKind parse_target_kind(const std::string& name);
std::string target_kind_name(TargetKind kind);

struct Target1D {
    TargetKind kind;
    std::vector<double> x;  // log-spaced, increasing
    std::vector<double> y;
};

// Target as a function of the log argument.
double target_value_log(TargetKind kind, double t);
double target_slope_log(TargetKind kind, double t);

constexpr double kTargetLogLo = -8.0;
constexpr double kTargetLogHi = 8.0;
constexpr double kCapPointLog = 5.0;     // outlier_capping plateau starts here
constexpr double kSignalEndLog = 0.0;    // signal region is [kTargetLogLo, kSignalEndLog]

Target1D gen_target_1d(TargetKind kind, int points);

struct Fit1D {
    SplineCurve curve;
    double sup_error;
    double min_derivative;    // min f'(x) over a dense grid of the target range
    double derivative_ratio;  // max log-slope on the cap region / min log-slope on the signal region
    int inflections;          // sign changes of the log-domain second derivative
};

constexpr double kMinFitSlope = 1e-2;

// Adam on the mean squared error, warm-started from the least-squares affine fit in log x.
Fit1D fit_spline_1d(const Target1D& target, const KnotGrid& grid, const TrainConfig& config, int steps = 2000);

// Knot grid spanning the 1D target domain.
inline KnotGrid target_grid(int intervals = 10) { return build_grid(3, intervals, kTargetLogLo, kTargetLogHi); }

// Adam settings used for the 1D fits.
inline TrainConfig fit1d_config() {
    TrainConfig c;
    c.learning_rate = 0.05;
    c.weight_decay = 0.0;
    c.clip_norm = 1e6;
    return c;
}

// Weighted least squares on (log x, value) samples by Levenberg-Marquardt, starting from the identity curve.
SplineCurve fit_spline_lsq(const std::vector<double>& log_x, const std::vector<double>& values,
                           const std::vector<double>& weights, const KnotGrid& grid, int iterations = 200);

}  // namespace spm
