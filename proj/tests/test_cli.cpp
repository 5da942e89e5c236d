#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <json.hpp>
#include <sstream>
#include <unistd.h>

#include "spm/checks.hpp"
#include "spm/cli.hpp"
#include "spm/io.hpp"

using namespace spm;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "spm");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() / ("spm_cli_" + std::to_string(::getpid()) + "_" +
                                           ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }
    std::string path(const std::string& name) const { return (dir / name).string(); }

    void small_split(const std::string& train, const std::string& test, int dim = 4) {
        LabeledSpdDataset d = gen_bands_dataset(60, dim, BandSpec::canonical(), 9);
        std::vector<std::size_t> a, b;
        for (std::size_t i = 0; i < d.size(); ++i) (i < 40 ? a : b).push_back(i);
        save_dataset(path(train), d.subset(a));
        save_dataset(path(test), d.subset(b));
    }

    fs::path dir;
};

const std::vector<std::string> kQuick{"--epochs", "3", "--patience", "3"};

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

TEST_F(Cli, NoSubcommandIsUsageError) { EXPECT_EQ(cli({}).code, 1); }

TEST_F(Cli, UnknownFlagIsUsageError) { EXPECT_EQ(cli({"fit1d", "--kind", "outlier_capping", "--bogus"}).code, 1); }

TEST_F(Cli, CheckUnknownSuite) {
    auto r = cli({"check", "nope"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("unknown suite"), std::string::npos);
}

TEST_F(Cli, CheckAlemPrintsPassTable) {
    auto r = cli({"check", "alem"});
    EXPECT_EQ(r.code, 0) << r.out << r.err;
    EXPECT_NE(r.out.find("PASS"), std::string::npos);
    EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST_F(Cli, ProbeMalformedHeader) {
    small_split("tr.spd", "te.spd");
    write_text(path("bad.spd"), "matrices 4 10\n");
    auto r = cli(cat({"probe", "--train", path("bad.spd"), "--test", path("te.spd")}, kQuick));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("format error"), std::string::npos);
}

TEST_F(Cli, ProbeMissingFileIsFormatError) {
    small_split("tr.spd", "te.spd");
    EXPECT_EQ(cli(cat({"probe", "--train", path("none.spd"), "--test", path("te.spd")}, kQuick)).code, 1);
}

TEST_F(Cli, ProbeNonSpdNeedsProject) {
    small_split("tr.spd", "te.spd", 2);
    write_text(path("neg.spd"), "spd v1 2 2 2\n0 1 0 1\n1 1 2 1\n");
    EXPECT_EQ(cli(cat({"probe", "--train", path("tr.spd"), "--test", path("neg.spd"), "--metric", "le"}, kQuick)).code, 1);
    EXPECT_EQ(cli(cat({"probe", "--train", path("tr.spd"), "--test", path("neg.spd"), "--metric", "le", "--project"},
                      kQuick))
                  .code,
              0);
}

TEST_F(Cli, ProbeDimensionMismatch) {
    small_split("tr.spd", "unused.spd", 4);
    small_split("unused2.spd", "te3.spd", 3);
    auto r = cli(cat({"probe", "--train", path("tr.spd"), "--test", path("te3.spd")}, kQuick));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("dimension mismatch"), std::string::npos);
}

TEST_F(Cli, NegativeThetaNeedsFlag) {
    small_split("tr.spd", "te.spd");
    auto base = cat({"probe", "--train", path("tr.spd"), "--test", path("te.spd"), "--metric", "pcm", "--theta", "-0.5"},
                    kQuick);
    EXPECT_EQ(cli(base).code, 1);
    auto r = cli(cat(base, {"--allow-negative-theta"}));
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("warning"), std::string::npos);
    auto j = nlohmann::json::parse(r.out);
    EXPECT_TRUE(j["metrics"].contains("pcm-0.5"));
}

TEST_F(Cli, ThetaOnlyForPcm) {
    small_split("tr.spd", "te.spd");
    EXPECT_EQ(cli(cat({"probe", "--train", path("tr.spd"), "--test", path("te.spd"), "--metric", "le", "--theta", "1"},
                      kQuick))
                  .code,
              1);
}

TEST_F(Cli, ProbeMatchesInMemoryRun) {
    ASSERT_EQ(cli({"gen-bands", "--count", "200", "--seed", "3", "--train-out", path("tr.spd"), "--test-out",
                   path("te.spd")})
                  .code,
              0);
    for (const std::string metric : {"sspm", "lc", "airm"}) {
        auto r = cli(cat({"probe", "--train", path("tr.spd"), "--test", path("te.spd"), "--metric", metric, "--seed",
                          "3", "--model-out", path("m.json")},
                         kQuick));
        ASSERT_EQ(r.code, 0) << r.err;
        auto j = nlohmann::json::parse(r.out);
        BenchConfig bc;
        bc.count = 200;
        bc.train.seed = 3;
        bc.train.max_epochs = 3;
        bc.train.patience = 3;
        auto [tr, te] = bench_split(bc);
        auto run = run_probe(tr, te, metric, "identity", bc.train);
        EXPECT_NEAR(j["metrics"][metric]["test_acc"].get<double>(), run.test_acc, 1e-12) << metric;
        EXPECT_NEAR(j["metrics"][metric]["train_acc"].get<double>(), run.train_acc, 1e-12) << metric;
        auto model = load_model(path("m.json"));
        EXPECT_NEAR(evaluate(model, te), run.test_acc, 1e-12) << metric;
    }
}

TEST_F(Cli, ExportSplineIdentity) {
    write_text(path("id.json"), identity_curve().to_json());
    auto r = cli({"export-spline", "--model", path("id.json"), "--samples", "50"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream is(r.out);
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "log_lambda,f_value,f_derivative");
    int rows = 0;
    while (std::getline(is, line)) {
        double t, f, d;
        ASSERT_EQ(std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &f, &d), 3) << line;
        EXPECT_NEAR(f, t, 1e-9 * std::max(1.0, std::abs(t)));
        EXPECT_GT(d, 0.0);
        EXPECT_NEAR(d * std::exp(t), 1.0, 1e-9);
        ++rows;
    }
    EXPECT_EQ(rows, 50);
}

TEST_F(Cli, ExportSplineFromModelIsMonotone) {
    small_split("tr.spd", "te.spd");
    ASSERT_EQ(cli(cat({"probe", "--train", path("tr.spd"), "--test", path("te.spd"), "--init", "random", "--model-out",
                       path("m.json")},
                      kQuick))
                  .code,
              0);
    auto r = cli({"export-spline", "--model", path("m.json"), "--out", path("s.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream is(read_text(path("s.csv")));
    std::string line;
    std::getline(is, line);
    double prev = -INFINITY;
    int rows = 0;
    while (std::getline(is, line)) {
        double t, f, d;
        ASSERT_EQ(std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &f, &d), 3);
        EXPECT_GT(f, prev);
        EXPECT_GT(d, 0.0);
        prev = f;
        ++rows;
    }
    EXPECT_EQ(rows, 200);
}

TEST_F(Cli, ExportSplineMissingModel) { EXPECT_NE(cli({"export-spline", "--model", path("none.json")}).code, 0); }

TEST_F(Cli, Fit1dFields) {
    auto r = cli({"fit1d", "--kind", "outlier_capping", "--steps", "50", "--points", "40"});
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = nlohmann::json::parse(r.out);
    for (const char* k : {"sup_error", "min_derivative", "derivative_ratio", "derivative_ratio_domain", "inflections",
                          "spline", "samples"})
        EXPECT_TRUE(j.contains(k)) << k;
    EXPECT_EQ(j["samples"].size(), 40u);
    EXPECT_GT(j["min_derivative"].get<double>(), 0.0);
}

TEST_F(Cli, Fit1dUnknownKind) { EXPECT_EQ(cli({"fit1d", "--kind", "wiggly"}).code, 1); }

TEST_F(Cli, BenchUnknownMetric) { EXPECT_EQ(cli({"bench-adversarial", "--metrics", "le,foo"}).code, 1); }

TEST_F(Cli, BenchWritesResults) {
    auto r = cli({"bench-adversarial", "--metrics", "le,sspm", "--count", "100", "--epochs", "2", "--out",
                  path("res.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = nlohmann::json::parse(read_text(path("res.json")));
    EXPECT_EQ(j["command"], "bench-adversarial");
    EXPECT_TRUE(j["metrics"].contains("le"));
    EXPECT_TRUE(j["metrics"]["sspm"].contains("spline"));
    EXPECT_EQ(j["seed"].get<unsigned long long>(), default_seed());
}

TEST(DefaultSeed, ReadsEnvironment) {
    const char* prev = std::getenv("SPM_SEED");
    std::string saved = prev ? prev : "";
    ::setenv("SPM_SEED", "1234", 1);
    EXPECT_EQ(default_seed(), 1234u);
    ::setenv("SPM_SEED", "12x", 1);
    EXPECT_EQ(default_seed(), 42u);
    ::unsetenv("SPM_SEED");
    EXPECT_EQ(default_seed(), 42u);
    if (prev) ::setenv("SPM_SEED", saved.c_str(), 1);
}
