#pragma once

#include <random>
#include <stdexcept>

#include <Eigen/Dense>

namespace spm {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Raised when a factorization or eigensolver cannot produce a result.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class SymmetricMatrix {
public:
    SymmetricMatrix() = default;
    explicit SymmetricMatrix(const Mat& m);  // symmetrizes
    const Mat& mat() const { return m_; }
    Eigen::Index dim() const { return m_.rows(); }

private:
    Mat m_;
};

class SpdMatrix {
public:
    SpdMatrix() = default;
    // Validates strict positivity; with project=true eigenvalues are clamped to 1e-12 instead.
    explicit SpdMatrix(const Mat& m, bool project = false);
    const Mat& mat() const { return m_; }
    Eigen::Index dim() const { return m_.rows(); }

private:
    Mat m_;
};

struct SpectralDecomp {
    Mat u;
    Vec eigenvalues;  // ascending
};

struct CholFactor {
    Mat l;
    bool used_fallback = false;
};

struct PerturbationPolicy {
    double delta = 1e-8;
};

constexpr double kEigJitter = 1e-8;
constexpr double kCholJitter = 1e-4;
constexpr double kCholFloor = 1e-4;

Mat symmetrize(const Mat& m);

// Cyclic Jacobi on s + diag(i * jitter), i = 1..n.
SpectralDecomp eig_sym(const Mat& s, double jitter = kEigJitter);

Vec perturb_spectrum(const Vec& eigenvalues, const PerturbationPolicy& policy = {});

// Primary attempt on s + jitter*I; on failure eigen-clamp to kCholFloor and refactor.
CholFactor chol_with_fallback(const Mat& s, double jitter = kCholJitter);

Mat random_orthogonal(Eigen::Index dim, unsigned long long seed);
Mat random_orthogonal(Eigen::Index dim, std::mt19937_64& rng);
SpdMatrix random_spd(Eigen::Index dim, double eig_lo, double eig_hi, unsigned long long seed);

// max |m - m^T|
double asymmetry(const Mat& m);

}  // namespace spm
