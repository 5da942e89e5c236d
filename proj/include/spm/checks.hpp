#pragma once

#include <string>
#include <vector>

#include "spm/learn.hpp"
#include "spm/synthetic.hpp"

namespace spm {

struct CheckLine {
    std::string name;
    bool pass = false;
    double value = 0.0;      // the measured quantity
    double threshold = 0.0;  // the bound it is compared against
    std::string detail;
};

struct SuiteResult {
    std::string suite;
    std::vector<CheckLine> lines;
    bool pass() const;
};

SuiteResult check_gradients(int trials = 100, unsigned long long seed = 7);
SuiteResult check_roundtrip(int count = 1000, unsigned long long seed = 11);
SuiteResult check_frechet(int sets = 20, unsigned long long seed = 13);
SuiteResult check_transport(int triples = 100, unsigned long long seed = 17);
SuiteResult check_alem();
SuiteResult check_subsumption(int pairs = 100, unsigned long long seed = 19);
SuiteResult check_1d();

struct MetricRun {
    std::string metric;
    double train_acc = 0.0, test_acc = 0.0;
    int best_epoch = 0, epochs = 0;
    double seconds = 0.0;
    std::vector<EpochRecord> history;
    std::string spline_json;  // learned curve for spline kinds
};

struct BenchConfig {
    std::vector<std::string> metrics{"le", "lc", "pcm0.5", "cspm", "sspm"};
    int count = 1000;
    int dim = 4;
    double gap = 0.903;
    double test_fraction = 0.2;
    std::string init = "identity";
    TrainConfig train;
};

struct BenchResult {
    BenchConfig config;
    std::vector<MetricRun> runs;
    double seconds = 0.0;
    const MetricRun* find(const std::string& metric) const;
};

// Bands dataset, fixed stratified test split, one probe per metric.
BenchResult run_adversarial_bench(const BenchConfig& config);

// Trains one probe; "airm" selects the whitened-log probe.
MetricRun run_probe(const LabeledSpdDataset& train, const LabeledSpdDataset& test, const std::string& metric,
                    const std::string& init, const TrainConfig& config, ProbeModel* model_out = nullptr,
                    bool allow_negative_theta = false);

std::pair<LabeledSpdDataset, LabeledSpdDataset> bench_split(const BenchConfig& config);

}  // namespace spm
