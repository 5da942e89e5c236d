#pragma once

#include <functional>
#include <vector>

#include "spm/metrics.hpp"

namespace spm::oracle {

struct FdConfig {
    double h = 1e-6;
};

// Central differences over the symmetric basis E_ij + E_ji (halved on the diagonal).
Mat finite_diff_grad(const std::function<double(const Mat&)>& fn, const Mat& s, const FdConfig& config = {});

// Central differences of a scalar function of a parameter vector.
std::vector<double> finite_diff_vec(const std::function<double(const std::vector<double>&)>& fn,
                                    const std::vector<double>& p, double h = 1e-6);

// Minimizes sum_i w_i d^2(expm(G), P_i) over symmetric G by finite-difference gradient descent
// (Barzilai-Borwein steps); returns the iterate with the smallest gradient norm.
Mat brute_frechet(const PullbackMetric& metric, const std::vector<Mat>& points, const std::vector<double>& weights,
                  int steps = 5000);

// Max |a(x) - b(x)| over log-spaced x in [lo, hi].
double sample_sup_error(const std::function<double(double)>& a, const std::function<double(double)>& b, double lo,
                        double hi, int samples);

// Independent references built on Eigen's self-adjoint solver.
Mat expm_sym(const Mat& s);
Mat logm_spd(const Mat& s);

}  // namespace spm::oracle
