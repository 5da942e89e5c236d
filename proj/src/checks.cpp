#include "spm/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

#include "spm/oracle.hpp"
#include "spm/riemann.hpp"

namespace spm {

namespace {

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double rel_err(const Mat& a, const Mat& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

double rel_err(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

Mat random_sym(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Mat a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = nd(rng);
    return symmetrize(a);
}

// Ratio-spaced spectrum; with `degenerate` the first two (and for n >= 4 the next two) coincide.
Mat random_spectrum_matrix(Eigen::Index n, bool degenerate, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> start(0.3, 1.0), ratio(1.3, 2.0);
    Vec lam(n);
    lam(0) = start(rng);
    for (Eigen::Index i = 1; i < n; ++i) lam(i) = lam(i - 1) * ratio(rng);
    if (degenerate) {
        if (n >= 2) lam(1) = lam(0);
        if (n >= 4) lam(3) = lam(2);
    }
    Mat u = random_orthogonal(n, rng);
    return symmetrize(u * lam.asDiagonal() * u.transpose());
}

// Ties are broken by offsets of order delta = 1e-8, so on degenerate spectra the forward map is smooth
// only at scales well above delta; the oracle step there is chosen to keep delta / h below 1e-5.
constexpr double kDegenerateFdStep = 1e-3;

std::vector<std::pair<std::string, PullbackMetric>> gradient_metrics(unsigned long long seed) {
    KnotGrid g = build_grid();
    return {{"sspm", PullbackMetric::sspm(SplineCurve(g, init_random(g, seed)))},
            {"cspm", PullbackMetric::cspm(SplineCurve(g, init_random(g, seed + 1)))},
            {"le", PullbackMetric::le()},
            {"lc", PullbackMetric::lc()},
            {"pcm0.5", PullbackMetric::pcm(0.5)}};
}

CheckLine bound_line(std::string name, double value, double threshold, bool below = true) {
    CheckLine l;
    l.name = std::move(name);
    l.value = value;
    l.threshold = threshold;
    l.pass = below ? value < threshold : value > threshold;
    return l;
}

}  // namespace

bool SuiteResult::pass() const {
    return std::all_of(lines.begin(), lines.end(), [](const CheckLine& l) { return l.pass; });
}

SuiteResult check_gradients(int trials, unsigned long long seed) {
    SuiteResult res{"gradcheck", {}};
    std::mt19937_64 rng(seed);
    for (auto& [name, metric] : gradient_metrics(seed)) {
        double worst_sep = 0.0, worst_deg = 0.0, worst_spline_sep = 0.0, worst_spline_deg = 0.0, worst_k = 0.0;
        bool finite = true;
        for (int pass = 0; pass < 2; ++pass) {
            const bool degenerate = pass == 1;
            for (int t = 0; t < trials; ++t) {
                const Eigen::Index n = 2 + t % 7;
                Mat s = random_spectrum_matrix(n, degenerate, rng);
                Mat up = random_sym(n, rng);
                if (!metric.spectral()) up = strict_lower(up) + Mat(up.diagonal().asDiagonal());
                auto loss = [&](const Mat& x) { return (up.array() * metric.forward(x).array()).sum(); };
                auto g = metric.backward(s, up);
                finite = finite && g.grad_input.allFinite();
                for (double v : g.grad_spline) finite = finite && std::isfinite(v);
                const double e = rel_err(g.grad_input, oracle::finite_diff_grad(loss, s, {degenerate ? kDegenerateFdStep : 1e-6}));
                (degenerate ? worst_deg : worst_sep) = std::max(degenerate ? worst_deg : worst_sep, e);
                if (metric.has_spline()) {
                    auto lp = [&](const std::vector<double>& p) {
                        auto m2 = metric.with_spline(metric.spline().with_flat_params(p));
                        return (up.array() * m2.forward(s).array()).sum();
                    };
                    auto fd = oracle::finite_diff_vec(lp, metric.spline().flat_params());
                    double es = rel_err(g.grad_spline, fd);
                    double& slot = degenerate ? worst_spline_deg : worst_spline_sep;
                    slot = std::max(slot, es);
                }
                if (degenerate && metric.spectral()) {
                    Prepared p = metric.prepare(s);
                    Mat k = metric.dk(p.lam);
                    const double bound = (metric.scalar(p.lam(n - 1)) - metric.scalar(p.lam(0))) / metric.delta;
                    worst_k = std::max(worst_k, k.cwiseAbs().maxCoeff() / bound);
                }
            }
        }
        res.lines.push_back(bound_line("gradcheck " + name + " separated input", worst_sep, 1e-6));
        res.lines.push_back(bound_line("gradcheck " + name + " degenerate input", worst_deg, 1e-4));
        if (metric.has_spline()) {
            res.lines.push_back(bound_line("gradcheck " + name + " separated spline", worst_spline_sep, 1e-6));
            res.lines.push_back(bound_line("gradcheck " + name + " degenerate spline", worst_spline_deg, 1e-4));
        }
        CheckLine fl;
        fl.name = "gradcheck " + name + " finite";
        fl.pass = finite;
        fl.value = finite ? 1.0 : 0.0;
        fl.threshold = 1.0;
        res.lines.push_back(fl);
        if (metric.spectral())
            res.lines.push_back(bound_line("gradcheck " + name + " max|K| / bound", worst_k, 1.0 + 1e-12));
    }
    return res;
}

SuiteResult check_roundtrip(int count, unsigned long long seed) {
    SuiteResult res{"roundtrip", {}};
    KnotGrid g = build_grid();
    std::vector<std::pair<std::string, PullbackMetric>> metrics = {
        {"sspm identity", PullbackMetric::sspm(identity_curve(g))},
        {"sspm random", PullbackMetric::sspm(SplineCurve(g, init_random(g, seed)))},
        {"cspm identity", PullbackMetric::cspm(identity_curve(g))},
        {"cspm random", PullbackMetric::cspm(SplineCurve(g, init_random(g, seed + 1)))},
        {"le", PullbackMetric::le()},
        {"lc", PullbackMetric::lc()},
        {"pcm0.5", PullbackMetric::pcm(0.5)}};
    for (auto& [name, metric] : metrics) {
        double worst_inv = 0.0, worst_fwd = 0.0;
        for (int i = 0; i < count; ++i) {
            const Eigen::Index n = 2 + i % 15;
            Mat s = random_spd(n, 0.1, 10.0, seed * 1000003ULL + i).mat();
            Mat x = metric.forward(s);
            worst_inv = std::max(worst_inv, rel_err(metric.inverse(x), s));
            worst_fwd = std::max(worst_fwd, rel_err(metric.forward(metric.inverse(x)), x));
        }
        res.lines.push_back(bound_line("roundtrip " + name + " inverse(forward)", worst_inv, 1e-8));
        res.lines.push_back(bound_line("roundtrip " + name + " forward(inverse)", worst_fwd, 1e-8));
    }
    return res;
}

SuiteResult check_frechet(int sets, unsigned long long seed) {
    SuiteResult res{"frechet", {}};
    KnotGrid g = build_grid();
    std::vector<std::pair<std::string, PullbackMetric>> metrics = {
        {"sspm", PullbackMetric::sspm(SplineCurve(g, init_random(g, seed)))},
        {"cspm", PullbackMetric::cspm(SplineCurve(g, init_random(g, seed + 1)))}};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> wd(0.5, 2.0);
    for (auto& [name, metric] : metrics) {
        double worst = 0.0;
        int reductions = 0;
        for (int k = 0; k < sets; ++k) {
            std::vector<Mat> pts;
            std::vector<double> w;
            double total = 0.0;
            for (int i = 0; i < 5; ++i) {
                pts.push_back(random_spd(3, 0.5, 4.0, rng()).mat());
                w.push_back(wd(rng));
                total += w.back();
            }
            for (double& x : w) x /= total;
            Mat closed = frechet_mean(metric, pts, w);
            Mat brute = oracle::brute_frechet(metric, pts, w);
            worst = std::max(worst, (closed - brute).norm());
            const double base = frechet_objective(metric, closed, pts, w);
            for (int t = 0; t < 10; ++t) {
                Mat v = random_sym(3, rng);
                v /= v.norm();
                Mat moved = exp_map(metric, {closed, 1e-3 * v});
                if (frechet_objective(metric, moved, pts, w) < base) ++reductions;
            }
        }
        res.lines.push_back(bound_line("frechet " + name + " closed form vs brute force", worst, 1e-6));
        CheckLine l = bound_line("frechet " + name + " perturbations reducing objective", reductions, 0.5);
        res.lines.push_back(l);
    }
    return res;
}

SuiteResult check_transport(int triples, unsigned long long seed) {
    SuiteResult res{"transport", {}};
    KnotGrid g = build_grid();
    std::vector<std::pair<std::string, PullbackMetric>> metrics = {
        {"sspm", PullbackMetric::sspm(SplineCurve(g, init_random(g, seed)))},
        {"cspm", PullbackMetric::cspm(SplineCurve(g, init_random(g, seed + 1)))}};
    std::mt19937_64 rng(seed);
    for (auto& [name, metric] : metrics) {
        double worst_path = 0.0, worst_norm = 0.0;
        for (int t = 0; t < triples; ++t) {
            const Eigen::Index n = 2 + t % 7;
            Mat a = random_spd(n, 0.2, 5.0, rng()).mat();
            Mat b = random_spd(n, 0.2, 5.0, rng()).mat();
            Mat c = random_spd(n, 0.2, 5.0, rng()).mat();
            TangentVector v{a, random_sym(n, rng)};
            auto direct = parallel_transport(metric, v, b);
            auto hop = parallel_transport(metric, parallel_transport(metric, v, c), b);
            worst_path = std::max(worst_path, rel_err(hop.value, direct.value));
            const double na = tangent_norm(metric, v), nb = tangent_norm(metric, direct);
            worst_norm = std::max(worst_norm, std::abs(na - nb) / na);
        }
        res.lines.push_back(bound_line("transport " + name + " two-hop vs direct", worst_path, 1e-8));
        res.lines.push_back(bound_line("transport " + name + " norm preservation", worst_norm, 1e-8));
    }
    return res;
}

SuiteResult check_alem() {
    SuiteResult res{"alem", {}};
    auto a = alem_counterexample();
    Mat y1(2, 2), y2(2, 2);
    y1 << 1.0, 0.0, 0.0, 2.0;
    y2 << 1.5, -0.5, -0.5, 1.5;
    auto l1 = bound_line("alem Y1 = diag(1,2)", (a.y1 - y1).cwiseAbs().maxCoeff(), 1e-12);
    auto l2 = bound_line("alem Y2 = [[1.5,-0.5],[-0.5,1.5]]", (a.y2 - y2).cwiseAbs().maxCoeff(), 1e-12);
    auto l3 = bound_line("alem |Y1 - Y2|_F = 1", std::abs((a.y1 - a.y2).norm() - 1.0), 1e-12);
    auto l4 = bound_line("alem S-SPM under both bases", (a.sspm_u1 - a.sspm_u2).cwiseAbs().maxCoeff(), 1e-12);
    auto m = PullbackMetric::sspm(identity_curve());
    auto l5 = bound_line("alem S-SPM pipeline on rotated 2I",
                         (m.forward(a.u2 * a.s * a.u2.transpose()) - m.forward(a.s)).cwiseAbs().maxCoeff(), 1e-7);
    l1.detail = fmt("Y1 = [[%.17g, 0], [0, 2]]", a.y1(0, 0));
    l2.detail = fmt("Y2 off-diagonal %.17g", a.y2(0, 1));
    res.lines = {l1, l2, l3, l4, l5};
    return res;
}

SuiteResult check_subsumption(int pairs, unsigned long long seed) {
    SuiteResult res{"subsumption", {}};
    KnotGrid g = build_grid();
    auto ss = PullbackMetric::sspm(identity_curve(g));
    auto cs = PullbackMetric::cspm(identity_curve(g));
    auto le = PullbackMetric::le();
    auto lc = PullbackMetric::lc();
    double worst_s = 0.0, worst_c = 0.0;
    for (int i = 0; i < pairs; ++i) {
        const Eigen::Index n = 2 + i % 7;
        Mat p = random_spd(n, 0.1, 10.0, seed * 7919ULL + 2 * i).mat();
        Mat q = random_spd(n, 0.1, 10.0, seed * 7919ULL + 2 * i + 1).mat();
        const double dle = distance(le, p, q), dlc = distance(lc, p, q);
        worst_s = std::max(worst_s, std::abs(distance(ss, p, q) - dle) / dle);
        worst_c = std::max(worst_c, std::abs(distance(cs, p, q) - dlc) / dlc);
    }
    res.lines.push_back(bound_line("subsumption identity S-SPM vs LE distance", worst_s, 1e-7));
    res.lines.push_back(bound_line("subsumption identity C-SPM vs LC distance", worst_c, 1e-7));

    std::vector<double> t, v, w;
    const double lo = std::log(0.1), hi = std::log(25.0);
    for (int i = 0; i < 400; ++i) {
        const double y = lo + (hi - lo) * i / 399.0;
        t.push_back(y);
        v.push_back(std::exp(0.5 * y));
        w.push_back(std::exp(-0.5 * y));
    }
    SplineCurve fit = fit_spline_lsq(t, v, w, g);
    const double sup = oracle::sample_sup_error([&](double x) { return fit.eval(x) / std::sqrt(x); },
                                                [](double) { return 1.0; }, 0.1, 25.0, 5000);
    res.lines.push_back(bound_line("subsumption sqrt fit sup relative error on [0.1,25]", sup, 1e-2));
    return res;
}

SuiteResult check_1d() {
    SuiteResult res{"fit1d", {}};
    KnotGrid g = target_grid();
    TrainConfig cfg = fit1d_config();
    auto mono = fit_spline_1d(gen_target_1d(TargetKind::MonotoneInflected, 200), g, cfg);
    auto adv = fit_spline_1d(gen_target_1d(TargetKind::AdversarialNonmonotone, 200), g, cfg);
    auto cap = fit_spline_1d(gen_target_1d(TargetKind::OutlierCapping, 200), g, cfg);
    res.lines.push_back(bound_line("fit1d monotone_inflected sup error", mono.sup_error, 1e-2));
    res.lines.push_back(bound_line("fit1d monotone_inflected inflection count", mono.inflections, 1.5, false));
    res.lines.push_back(bound_line("fit1d adversarial_nonmonotone min f'", adv.min_derivative, 0.0, false));
    res.lines.push_back(bound_line("fit1d outlier_capping derivative ratio", cap.derivative_ratio, 0.1));
    return res;
}

const MetricRun* BenchResult::find(const std::string& metric) const {
    for (const auto& r : runs)
        if (r.metric == metric) return &r;
    return nullptr;
}

std::pair<LabeledSpdDataset, LabeledSpdDataset> bench_split(const BenchConfig& config) {
    auto data = gen_bands_dataset(config.count, config.dim, BandSpec::canonical(config.gap), config.train.seed);
    auto [keep, held] = stratified_split(data.labels, config.test_fraction, config.train.seed);
    return {data.subset(keep), data.subset(held)};
}

MetricRun run_probe(const LabeledSpdDataset& train, const LabeledSpdDataset& test, const std::string& metric,
                    const std::string& init, const TrainConfig& config, ProbeModel* model_out,
                    bool allow_negative_theta) {
    const auto t0 = std::chrono::steady_clock::now();
    TrainResult tr;
    if (metric == "airm") {
        tr = train_airm_probe(train, config);
    } else {
        KnotGrid g = build_grid();
        SplineCurve curve = init == "random" ? SplineCurve(g, init_random(g, config.seed)) : identity_curve(g);
        if (init != "random" && init != "identity") throw std::invalid_argument("init must be identity or random");
        tr = train_probe(train, parse_metric(metric, curve, allow_negative_theta), config);
    }
    MetricRun run;
    run.metric = metric;
    run.train_acc = evaluate(tr.model, train);
    run.test_acc = test.size() ? evaluate(tr.model, test) : 0.0;
    run.best_epoch = tr.best_epoch;
    run.epochs = static_cast<int>(tr.history.size());
    run.history = tr.history;
    if (tr.model.metric && tr.model.metric->has_spline()) run.spline_json = tr.model.metric->spline().to_json();
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (model_out) *model_out = std::move(tr.model);
    return run;
}

BenchResult run_adversarial_bench(const BenchConfig& config) {
    const auto t0 = std::chrono::steady_clock::now();
    BenchResult res;
    res.config = config;
    auto [train, test] = bench_split(config);
    for (const auto& m : config.metrics) res.runs.push_back(run_probe(train, test, m, config.init, config.train));
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace spm
