#include "spm/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "spm/checks.hpp"
#include "spm/io.hpp"

namespace spm {

namespace {

using nlohmann::json;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json config_json(const TrainConfig& c) {
    return {{"learning_rate", c.learning_rate}, {"weight_decay", c.weight_decay}, {"batch_size", c.batch_size},
            {"max_epochs", c.max_epochs},       {"patience", c.patience},         {"clip_norm", c.clip_norm},
            {"seed", c.seed},                   {"val_fraction", c.val_fraction}};
}

json band_json(const BandSpec& s) {
    auto iv = [](const Interval& i) { return json::array({i.lo, i.hi}); };
    return {{"low_noise", iv(s.low_noise)},
            {"low_signal", iv(s.low_signal)},
            {"high_noise", iv(s.high_noise)},
            {"high_signal", iv(s.high_signal)},
            {"low_signal_class", {iv(s.low_signal_class[0]), iv(s.low_signal_class[1])}},
            {"high_signal_class", {iv(s.high_signal_class[0]), iv(s.high_signal_class[1])}},
            {"log_uniform", s.log_uniform}};
}

json run_json(const MetricRun& r) {
    json hist = json::array();
    for (const auto& e : r.history)
        hist.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"train_acc", e.train_acc}, {"val_acc", e.val_acc}});
    json j = {{"train_acc", r.train_acc}, {"test_acc", r.test_acc}, {"best_epoch", r.best_epoch},
              {"epochs", r.epochs},       {"history", hist}};
    if (!r.spline_json.empty()) j["spline"] = json::parse(r.spline_json);
    return j;
}

void emit(const std::string& path, const json& j, std::ostream& out) {
    const std::string text = j.dump(2) + "\n";
    if (path.empty() || path == "-")
        out << text;
    else
        write_text(path, text);
}

void add_train_flags(CLI::App* sub, TrainConfig& c) {
    sub->add_option("--lr", c.learning_rate, "Adam learning rate")->capture_default_str();
    sub->add_option("--weight-decay", c.weight_decay, "coupled L2 weight decay")->capture_default_str();
    sub->add_option("--batch", c.batch_size, "minibatch size")->capture_default_str();
    sub->add_option("--epochs", c.max_epochs, "maximum epochs")->capture_default_str();
    sub->add_option("--patience", c.patience, "early-stopping patience")->capture_default_str();
    sub->add_option("--clip", c.clip_norm, "global gradient norm clip")->capture_default_str();
    sub->add_option("--val-fraction", c.val_fraction, "validation fraction of the training set")->capture_default_str();
}

void print_suite(const SuiteResult& r, std::ostream& out) {
    char buf[512];
    for (const auto& l : r.lines) {
        std::snprintf(buf, sizeof buf, "%-4s  %-58s value=%-12.4g threshold=%.4g", l.pass ? "PASS" : "FAIL",
                      l.name.c_str(), l.value, l.threshold);
        out << buf;
        if (!l.detail.empty()) out << "  " << l.detail;
        out << '\n';
    }
}

SuiteResult run_suite(const std::string& name) {
    if (name == "gradcheck") return check_gradients();
    if (name == "roundtrip") return check_roundtrip();
    if (name == "frechet") return check_frechet();
    if (name == "transport") return check_transport();
    if (name == "alem") return check_alem();
    if (name == "subsumption") return check_subsumption();
    if (name == "fit1d") return check_1d();
    throw UsageError("unknown suite: " + name);
}

const std::vector<std::string> kSuites{"gradcheck", "roundtrip", "frechet", "transport", "alem", "subsumption", "fit1d"};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

int cmd_bench(const BenchConfig& cfg, const std::string& out_path, std::ostream& out, std::ostream& err) {
    for (const auto& m : cfg.metrics) {
        if (m == "airm") continue;
        try {
            parse_metric(m, identity_curve());
        } catch (const std::exception& e) {
            err << "error: " << e.what() << '\n';
            return 1;
        }
    }
    BenchResult res;
    try {
        cfg.train.validate();
        res = run_adversarial_bench(cfg);
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "training failed: " << e.what() << '\n';
        return 2;
    }
    json metrics = json::object();
    json timings = {{"total_seconds", res.seconds}};
    for (const auto& r : res.runs) {
        metrics[r.metric] = run_json(r);
        timings[r.metric] = r.seconds;
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-8s train_acc=%.4f test_acc=%.4f best_epoch=%d (%.1fs)", r.metric.c_str(),
                      r.train_acc, r.test_acc, r.best_epoch, r.seconds);
        err << buf << '\n';
    }
    json j = {{"command", "bench-adversarial"},
              {"config",
               {{"metrics", cfg.metrics},
                {"count", cfg.count},
                {"dim", cfg.dim},
                {"gap", cfg.gap},
                {"test_fraction", cfg.test_fraction},
                {"init", cfg.init},
                {"bands", band_json(BandSpec::canonical(cfg.gap))},
                {"train", config_json(cfg.train)}}},
              {"seed", cfg.train.seed},
              {"metrics", metrics},
              {"timings", timings}};
    emit(out_path, j, out);
    return 0;
}

}  // namespace

unsigned long long default_seed() {
    if (const char* s = std::getenv("SPM_SEED")) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(s, &end, 10);
        if (end && end != s && *end == '\0') return v;
    }
    return 42;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Spline-pullback metrics on SPD matrices"};
    app.require_subcommand(1);
    const unsigned long long seed0 = default_seed();

    BenchConfig bench;
    bench.train.seed = seed0;
    std::string metrics_list = "le,lc,pcm0.5,cspm,sspm", bench_out;
    auto* b = app.add_subcommand("bench-adversarial", "adversarial bands benchmark");
    b->add_option("--metrics", metrics_list, "comma-separated metrics (sspm, cspm, le, lc, pcm<theta>, airm)")
        ->capture_default_str();
    b->add_option("--seed", bench.train.seed, "seed for data, split and training")->capture_default_str();
    b->add_option("--count", bench.count, "dataset size")->capture_default_str()->check(CLI::Range(4, 1000000));
    b->add_option("--dim", bench.dim, "matrix dimension")->capture_default_str()->check(CLI::Range(1, 128));
    b->add_option("--gap", bench.gap, "class gap fraction in the high signal band")->capture_default_str();
    b->add_option("--init", bench.init, "spline initialization")->check(CLI::IsMember({"identity", "random"}))->capture_default_str();
    b->add_option("--test-fraction", bench.test_fraction, "held-out fraction")->capture_default_str();
    b->add_option("--out", bench_out, "results JSON path (stdout when omitted)");
    add_train_flags(b, bench.train);

    std::string fit_kind, fit_out;
    int fit_points = 200, fit_steps = 2000, fit_intervals = 10;
    double fit_lo = kTargetLogLo, fit_hi = kTargetLogHi;
    TrainConfig fit_cfg = fit1d_config();
    auto* f = app.add_subcommand("fit1d", "fit a spline to a 1D target");
    f->add_option("--kind", fit_kind, "monotone_inflected | adversarial_nonmonotone | outlier_capping")->required();
    f->add_option("--points", fit_points, "target samples")->capture_default_str();
    f->add_option("--steps", fit_steps, "Adam steps")->capture_default_str();
    f->add_option("--lr", fit_cfg.learning_rate, "Adam learning rate")->capture_default_str();
    f->add_option("--intervals", fit_intervals, "interior knot intervals")->capture_default_str();
    f->add_option("--lo", fit_lo, "grid lower bound (log domain)")->capture_default_str();
    f->add_option("--hi", fit_hi, "grid upper bound (log domain)")->capture_default_str();
    f->add_option("--out", fit_out, "output JSON path (stdout when omitted)");

    std::string model_path, csv_out;
    int samples = 200;
    auto* x = app.add_subcommand("export-spline", "sample a learned spline curve as CSV");
    x->add_option("--model", model_path, "spline or probe model JSON")->required();
    x->add_option("--samples", samples, "row count")->capture_default_str()->check(CLI::Range(2, 10000000));
    x->add_option("--out", csv_out, "CSV path (stdout when omitted)");

    std::string suite;
    auto* c = app.add_subcommand("check", "run an invariant suite");
    c->add_option("suite", suite, "gradcheck | roundtrip | frechet | transport | alem | subsumption | fit1d | all")->required();

    TrainConfig probe_cfg;
    probe_cfg.seed = seed0;
    std::string train_path, test_path, probe_metric = "sspm", probe_init = "identity", probe_out, model_out;
    double theta = 0.5;
    bool allow_negative = false, project = false;
    auto* p = app.add_subcommand("probe", "train a linear probe on SPD dataset files");
    p->add_option("--train", train_path, "training dataset")->required();
    p->add_option("--test", test_path, "test dataset")->required();
    p->add_option("--metric", probe_metric, "sspm | cspm | le | lc | pcm | airm")->capture_default_str();
    auto* theta_opt = p->add_option("--theta", theta, "PCM power")->capture_default_str();
    p->add_flag("--allow-negative-theta", allow_negative, "permit theta < 0 for PCM");
    p->add_option("--init", probe_init, "spline initialization")->check(CLI::IsMember({"identity", "random"}))->capture_default_str();
    p->add_option("--seed", probe_cfg.seed, "training seed")->capture_default_str();
    p->add_flag("--project", project, "clamp non-positive eigenvalues instead of rejecting");
    p->add_option("--out", probe_out, "results JSON path (stdout when omitted)");
    p->add_option("--model-out", model_out, "serialized model path");
    add_train_flags(p, probe_cfg);

    BenchConfig gen;
    gen.train.seed = seed0;
    std::string gen_out, gen_train, gen_test;
    auto* g = app.add_subcommand("gen-bands", "export the bands dataset");
    g->add_option("--seed", gen.train.seed, "seed")->capture_default_str();
    g->add_option("--count", gen.count, "dataset size")->capture_default_str()->check(CLI::Range(4, 1000000));
    g->add_option("--dim", gen.dim, "matrix dimension")->capture_default_str()->check(CLI::Range(1, 128));
    g->add_option("--gap", gen.gap, "class gap fraction")->capture_default_str();
    g->add_option("--test-fraction", gen.test_fraction, "held-out fraction")->capture_default_str();
    g->add_option("--out", gen_out, "full dataset path");
    g->add_option("--train-out", gen_train, "training split path (benchmark split)");
    g->add_option("--test-out", gen_test, "test split path (benchmark split)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 1;
    }

    try {
        if (*b) {
            bench.metrics = split_list(metrics_list);
            if (bench.metrics.empty()) throw UsageError("no metrics given");
            return cmd_bench(bench, bench_out, out, err);
        }

        if (*f) {
            TargetKind kind;
            try {
                kind = parse_target_kind(fit_kind);
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            if (fit_points < 16) throw UsageError("--points must be at least 16");
            KnotGrid grid = build_grid(3, fit_intervals, fit_lo, fit_hi);
            Fit1D fit = fit_spline_1d(gen_target_1d(kind, fit_points), grid, fit_cfg, fit_steps);
            json pts = json::array();
            for (int i = 0; i < fit_points; ++i) {
                const double t = kTargetLogLo + (kTargetLogHi - kTargetLogLo) * i / (fit_points - 1);
                pts.push_back({{"log_x", t},
                               {"target", target_value_log(kind, t)},
                               {"fit", fit.curve.eval_log(t)},
                               {"fit_log_slope", fit.curve.deriv_log(t)}});
            }
            json j = {{"command", "fit1d"},
                      {"config",
                       {{"kind", fit_kind},
                        {"points", fit_points},
                        {"steps", fit_steps},
                        {"learning_rate", fit_cfg.learning_rate},
                        {"intervals", fit_intervals},
                        {"range", {fit_lo, fit_hi}}}},
                      {"sup_error", fit.sup_error},
                      {"min_derivative", fit.min_derivative},
                      {"derivative_ratio", fit.derivative_ratio},
                      {"derivative_ratio_domain", "log-slope d f / d log x"},
                      {"inflections", fit.inflections},
                      {"spline", json::parse(fit.curve.to_json())},
                      {"samples", pts}};
            emit(fit_out, j, out);
            return 0;
        }

        if (*x) {
            SplineCurve curve = load_spline(model_path);
            const double lo = curve.grid().lo - std::log(10.0), hi = curve.grid().hi + std::log(10.0);
            std::ostringstream os;
            os << "log_lambda,f_value,f_derivative\n";
            char buf[128];
            for (int i = 0; i < samples; ++i) {
                const double t = lo + (hi - lo) * i / (samples - 1);
                std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", t, curve.eval_log(t), curve.deriv(std::exp(t)));
                os << buf;
            }
            if (csv_out.empty() || csv_out == "-")
                out << os.str();
            else
                write_text(csv_out, os.str());
            return 0;
        }

        if (*c) {
            std::vector<std::string> names;
            if (suite == "all")
                names = kSuites;
            else if (std::find(kSuites.begin(), kSuites.end(), suite) != kSuites.end())
                names = {suite};
            else {
                err << "unknown suite: " << suite << '\n';
                return 2;
            }
            bool ok = true;
            for (const auto& n : names) {
                SuiteResult r = run_suite(n);
                print_suite(r, out);
                ok = ok && r.pass();
            }
            return ok ? 0 : 1;
        }

        if (*p) {
            std::string spec = probe_metric;
            if (probe_metric == "pcm") {
                if (theta < 0 && !allow_negative) throw UsageError("--theta < 0 requires --allow-negative-theta");
                char buf[40];
                std::snprintf(buf, sizeof buf, "pcm%.17g", theta);
                spec = buf;
                if (theta < 0)
                    err << "warning: theta < 0 reverses the eigenvalue order; the power map stays a diffeomorphism of "
                           "the SPD cone but its Cholesky route is defined only where 1 + theta * v > 0\n";
            } else if (theta_opt->count() > 0) {
                throw UsageError("--theta applies only to --metric pcm");
            }
            if (spec != "airm") {
                try {
                    parse_metric(spec, identity_curve(), allow_negative);
                } catch (const std::exception& e) {
                    throw UsageError(e.what());
                }
            }
            LabeledSpdDataset train, test;
            try {
                train = load_dataset(train_path, project);
                test = load_dataset(test_path, project);
            } catch (const FormatError& e) {
                err << "format error: " << e.what() << '\n';
                return 1;
            }
            if (train.size() == 0) {
                err << "format error: empty training set\n";
                return 1;
            }
            if (test.size() && (train.dim() != test.dim())) {
                err << "dimension mismatch: train " << train.dim() << " vs test " << test.dim() << '\n';
                return 2;
            }
            ProbeModel model;
            MetricRun run;
            try {
                probe_cfg.validate();
                run = run_probe(train, test, spec, probe_init, probe_cfg, &model, allow_negative);
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            if (!model_out.empty()) save_model(model_out, model);
            json j = {{"command", "probe"},
                      {"config",
                       {{"train", train_path},
                        {"test", test_path},
                        {"metric", spec},
                        {"init", probe_init},
                        {"project", project},
                        {"allow_negative_theta", allow_negative},
                        {"train_config", config_json(probe_cfg)}}},
                      {"seed", probe_cfg.seed},
                      {"metrics", {{spec, run_json(run)}}},
                      {"timings", {{"total_seconds", run.seconds}}}};
            emit(probe_out, j, out);
            return 0;
        }

        if (*g) {
            if (gen_out.empty() && gen_train.empty() && gen_test.empty()) throw UsageError("give --out or --train-out/--test-out");
            if (!gen_out.empty())
                save_dataset(gen_out, gen_bands_dataset(gen.count, gen.dim, BandSpec::canonical(gen.gap), gen.train.seed));
            if (!gen_train.empty() || !gen_test.empty()) {
                auto [tr, te] = bench_split(gen);
                if (!gen_train.empty()) save_dataset(gen_train, tr);
                if (!gen_test.empty()) save_dataset(gen_test, te);
            }
            return 0;
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const FormatError& e) {
        err << "format error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "failed: " << e.what() << '\n';
        return 2;
    }
    return 1;
}

}  // namespace spm
