#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "spm/metrics.hpp"

namespace spm {

struct TrainConfig {
    double learning_rate = 1e-3;
    double weight_decay = 1e-4;
    int batch_size = 32;
    int max_epochs = 100;
    int patience = 15;
    double clip_norm = 2.0;
    unsigned long long seed = 42;
    double val_fraction = 0.2;

    void validate() const;
};

struct LabeledSpdDataset {
    std::vector<Mat> matrices;
    std::vector<int> labels;

    std::size_t size() const { return matrices.size(); }
    Eigen::Index dim() const { return matrices.empty() ? 0 : matrices.front().rows(); }
    int classes() const;
    void validate() const;
    LabeledSpdDataset subset(const std::vector<std::size_t>& idx) const;
};

struct AdamState {
    std::vector<double> m, v;
    long long step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, const TrainConfig& config);

struct XentResult {
    double loss;
    std::vector<double> grad;
};
XentResult softmax_xent(std::span<const double> logits, int label);

// Rescales in place when the global L2 norm exceeds max_norm; returns the norm before clipping.
double clip_global_norm(std::span<double> grads, double max_norm);

// Per-feature batch standardization with running statistics and an affine output.
struct Standardizer {
    Vec running_mean, running_var, gamma, beta;
    double momentum = 0.1, eps = 1e-5;

    explicit Standardizer(Eigen::Index features = 0);
    Eigen::Index features() const { return gamma.size(); }
};

struct BnCache {
    Mat xhat;
    Vec inv_std;
};

// Rows are samples.
Mat standardize_batch(Standardizer& st, const Mat& batch, bool training, BnCache* cache = nullptr);

struct ProbeModel {
    std::optional<PullbackMetric> metric;  // empty for the AIRM-whitened probe
    Mat airm_mean;
    Standardizer bn;
    Mat w;  // classes x features
    Vec b;

    Vec features(const Mat& s) const;
    Vec logits(const Mat& s) const;
    int predict(const Mat& s) const;
};

struct EpochRecord {
    int epoch;
    double train_loss, train_acc, val_acc;
};

struct TrainResult {
    ProbeModel model;
    std::vector<EpochRecord> history;
    int best_epoch = 0;
    double best_val_acc = 0.0;
};

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(const std::vector<int>& labels,
                                                                               double fraction,
                                                                               unsigned long long seed);

TrainResult train_probe(const LabeledSpdDataset& data, const PullbackMetric& metric, const TrainConfig& config);
TrainResult train_airm_probe(const LabeledSpdDataset& data, const TrainConfig& config);

double evaluate(const ProbeModel& model, const LabeledSpdDataset& data);

// Training-mode mean cross-entropy over a batch (running stats untouched) and its gradient
// with respect to the spline parameters of the model's metric.
double probe_batch_loss(const ProbeModel& model, const std::vector<Mat>& xs, const std::vector<int>& ys,
                        std::vector<double>* spline_grad);

Mat le_mean(const std::vector<Mat>& matrices);
std::vector<Vec> airm_probe_features(const std::vector<Mat>& matrices, const Mat& global_mean);

void write_history_jsonl(std::ostream& os, const std::vector<EpochRecord>& history);

}  // namespace spm
