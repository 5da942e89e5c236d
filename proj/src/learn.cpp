#include "spm/learn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

namespace spm {

namespace {

Vec flatten(const Mat& m) { return Eigen::Map<const Vec>(m.data(), m.size()); }

Mat sym_log(const Mat& s) {
    auto ed = eig_sym(s, 0.0);
    if (!(ed.eigenvalues.minCoeff() > 0)) throw NumericError("matrix logarithm of a non-positive spectrum");
    Vec l = ed.eigenvalues.array().log();
    return symmetrize(ed.u * l.asDiagonal() * ed.u.transpose());
}

Mat sym_exp(const Mat& s) {
    auto ed = eig_sym(s, 0.0);
    Vec e = ed.eigenvalues.array().exp();
    return symmetrize(ed.u * e.asDiagonal() * ed.u.transpose());
}

Mat inv_sqrt(const Mat& s) {
    auto ed = eig_sym(s, 0.0);
    if (!(ed.eigenvalues.minCoeff() > 0)) throw NumericError("inverse square root of a non-positive spectrum");
    Vec r = ed.eigenvalues.cwiseSqrt().cwiseInverse();
    return symmetrize(ed.u * r.asDiagonal() * ed.u.transpose());
}

int argmax_low(const Vec& v) {
    int best = 0;
    for (int i = 1; i < v.size(); ++i)
        if (v(i) > v(best)) best = i;
    return best;
}

std::size_t spline_size(const ProbeModel& m) {
    return m.metric && m.metric->has_spline() ? m.metric->spline().param_count() : 0;
}

std::vector<double> pack(const ProbeModel& m) {
    std::vector<double> p;
    if (spline_size(m)) p = m.metric->spline().flat_params();
    const Eigen::Index f = m.bn.features(), k = m.w.rows();
    for (Eigen::Index j = 0; j < f; ++j) p.push_back(m.bn.gamma(j));
    for (Eigen::Index j = 0; j < f; ++j) p.push_back(m.bn.beta(j));
    for (Eigen::Index r = 0; r < k; ++r)
        for (Eigen::Index c = 0; c < f; ++c) p.push_back(m.w(r, c));
    for (Eigen::Index r = 0; r < k; ++r) p.push_back(m.b(r));
    return p;
}

void unpack(ProbeModel& m, std::span<const double> p) {
    std::size_t at = spline_size(m);
    if (at) m.metric = m.metric->with_spline(m.metric->spline().with_flat_params(p.subspan(0, at)));
    const Eigen::Index f = m.bn.features(), k = m.w.rows();
    for (Eigen::Index j = 0; j < f; ++j) m.bn.gamma(j) = p[at++];
    for (Eigen::Index j = 0; j < f; ++j) m.bn.beta(j) = p[at++];
    for (Eigen::Index r = 0; r < k; ++r)
        for (Eigen::Index c = 0; c < f; ++c) m.w(r, c) = p[at++];
    for (Eigen::Index r = 0; r < k; ++r) m.b(r) = p[at++];
}

// Features for the training loop: prepared factorizations (metric path) or fixed vectors.
struct FeatureSource {
    std::vector<Prepared> prep;
    std::vector<Vec> fixed;

    Vec get(const ProbeModel& m, std::size_t i) const {
        if (!fixed.empty()) return fixed[i];
        return flatten(m.metric->forward_prepared(prep[i]));
    }
};

struct PassResult {
    double loss = 0.0;
    std::vector<double> grad;
};

// Training-mode forward/backward over one batch; running stats move only through bn.
PassResult train_pass(const ProbeModel& m, Standardizer& bn, const FeatureSource& src,
                      const std::vector<std::size_t>& idx, const std::vector<int>& labels, bool want_grad) {
    const Eigen::Index bsz = static_cast<Eigen::Index>(idx.size());
    const Eigen::Index f = bn.features(), k = m.w.rows();
    Mat x(bsz, f);
    for (Eigen::Index r = 0; r < bsz; ++r) x.row(r) = src.get(m, idx[r]).transpose();
    BnCache cache;
    Mat y = standardize_batch(bn, x, true, &cache);
    Mat z = y * m.w.transpose();
    z.rowwise() += m.b.transpose();
    PassResult out;
    Mat dz(bsz, k);
    for (Eigen::Index r = 0; r < bsz; ++r) {
        std::vector<double> lg(k);
        for (Eigen::Index c = 0; c < k; ++c) lg[c] = z(r, c);
        auto xe = softmax_xent(lg, labels[idx[r]]);
        out.loss += xe.loss / static_cast<double>(bsz);
        for (Eigen::Index c = 0; c < k; ++c) dz(r, c) = xe.grad[c] / static_cast<double>(bsz);
    }
    if (!want_grad) return out;

    Mat dw = dz.transpose() * y;
    Vec db = dz.colwise().sum().transpose();
    Mat dy = dz * m.w;
    Vec dgamma = dy.cwiseProduct(cache.xhat).colwise().sum().transpose();
    Vec dbeta = dy.colwise().sum().transpose();
    Mat dxhat = dy.array().rowwise() * m.bn.gamma.transpose().array();
    Vec mean_dxhat = dxhat.colwise().mean().transpose();
    Vec mean_dxx = dxhat.cwiseProduct(cache.xhat).colwise().mean().transpose();
    Mat dx(bsz, f);
    for (Eigen::Index r = 0; r < bsz; ++r)
        for (Eigen::Index c = 0; c < f; ++c)
            dx(r, c) = cache.inv_std(c) * (dxhat(r, c) - mean_dxhat(c) - cache.xhat(r, c) * mean_dxx(c));

    const std::size_t ns = spline_size(m);
    out.grad.assign(ns, 0.0);
    if (ns && src.fixed.empty()) {
        const Eigen::Index n = m.metric->spectral() ? src.prep[0].u.rows() : src.prep[0].l.rows();
        for (Eigen::Index r = 0; r < bsz; ++r) {
            Vec row = dx.row(r).transpose();
            Mat g = Eigen::Map<const Mat>(row.data(), n, n);
            m.metric->spline_grad_prepared(src.prep[idx[r]], g, out.grad);
        }
    }
    for (Eigen::Index j = 0; j < f; ++j) out.grad.push_back(dgamma(j));
    for (Eigen::Index j = 0; j < f; ++j) out.grad.push_back(dbeta(j));
    for (Eigen::Index r = 0; r < k; ++r)
        for (Eigen::Index c = 0; c < f; ++c) out.grad.push_back(dw(r, c));
    for (Eigen::Index r = 0; r < k; ++r) out.grad.push_back(db(r));
    return out;
}

double accuracy_on(const ProbeModel& m, const FeatureSource& src, const std::vector<std::size_t>& idx,
                   const std::vector<int>& labels) {
    if (idx.empty()) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i : idx) {
        Vec x = src.get(m, i);
        Vec xh = (x - m.bn.running_mean).array() / (m.bn.running_var.array() + m.bn.eps).sqrt();
        Vec z = m.w * (xh.cwiseProduct(m.bn.gamma) + m.bn.beta) + m.b;
        if (argmax_low(z) == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(idx.size());
}

TrainResult train_core(ProbeModel model, const FeatureSource& src, const std::vector<int>& labels, int classes,
                       Eigen::Index features, const TrainConfig& config) {
    config.validate();
    if (classes < 2) throw std::invalid_argument("training needs at least two classes");
    auto [fit, val] = stratified_split(labels, config.val_fraction, config.seed);
    if (fit.size() < 2 || val.empty()) throw std::invalid_argument("dataset too small for the validation split");

    std::mt19937_64 rng(config.seed);
    model.bn = Standardizer(features);
    model.w.resize(classes, features);
    model.b.resize(classes);
    const double bound = 1.0 / std::sqrt(static_cast<double>(features));
    std::uniform_real_distribution<double> ud(-bound, bound);
    for (Eigen::Index r = 0; r < model.w.rows(); ++r)
        for (Eigen::Index c = 0; c < model.w.cols(); ++c) model.w(r, c) = ud(rng);
    for (Eigen::Index r = 0; r < model.b.size(); ++r) model.b(r) = ud(rng);

    std::vector<double> params = pack(model);
    AdamState adam;
    TrainResult result;
    result.best_val_acc = -1.0;
    ProbeModel best = model;
    int since_best = 0;
    std::vector<std::size_t> order = fit;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            if (end - start < 2) continue;
            std::vector<std::size_t> idx(order.begin() + start, order.begin() + end);
            auto pass = train_pass(model, model.bn, src, idx, labels, true);
            clip_global_norm(pass.grad, config.clip_norm);
            adam_step(adam, params, pass.grad, config);
            unpack(model, params);
            loss_sum += pass.loss;
            ++batches;
        }
        EpochRecord rec{epoch, batches ? loss_sum / batches : 0.0, accuracy_on(model, src, fit, labels),
                        accuracy_on(model, src, val, labels)};
        result.history.push_back(rec);
        if (rec.val_acc > result.best_val_acc) {
            result.best_val_acc = rec.val_acc;
            result.best_epoch = epoch;
            best = model;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }
    result.model = std::move(best);
    return result;
}

}  // namespace

void TrainConfig::validate() const {
    if (!(learning_rate > 0) || !(weight_decay >= 0) || batch_size < 1 || max_epochs < 1 || patience < 1 ||
        !(clip_norm > 0) || !(val_fraction > 0 && val_fraction < 1))
        throw std::invalid_argument("invalid training configuration");
}

int LabeledSpdDataset::classes() const {
    int k = 0;
    for (int l : labels) k = std::max(k, l + 1);
    return k;
}

void LabeledSpdDataset::validate() const {
    if (matrices.size() != labels.size()) throw std::invalid_argument("matrix and label counts differ");
    for (std::size_t i = 0; i < matrices.size(); ++i) {
        if (matrices[i].rows() != dim() || matrices[i].cols() != dim())
            throw std::invalid_argument("dataset matrices must share one dimension");
        if (labels[i] < 0) throw std::invalid_argument("labels must be non-negative");
    }
}

LabeledSpdDataset LabeledSpdDataset::subset(const std::vector<std::size_t>& idx) const {
    LabeledSpdDataset d;
    for (std::size_t i : idx) {
        d.matrices.push_back(matrices.at(i));
        d.labels.push_back(labels.at(i));
    }
    return d;
}

void adam_step(AdamState& st, std::span<double> params, std::span<const double> grads, const TrainConfig& config) {
    if (params.size() != grads.size()) throw std::invalid_argument("parameter and gradient sizes differ");
    if (st.m.empty()) {
        st.m.assign(params.size(), 0.0);
        st.v.assign(params.size(), 0.0);
    }
    if (st.m.size() != params.size()) throw std::invalid_argument("optimizer state size mismatch");
    ++st.step;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i] + config.weight_decay * params[i];
        st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * g;
        st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * g * g;
        const double mhat = st.m[i] / bc1;
        const double vhat = st.v[i] / bc2;
        params[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + st.eps);
    }
}

XentResult softmax_xent(std::span<const double> logits, int label) {
    if (label < 0 || label >= static_cast<int>(logits.size())) throw std::out_of_range("label out of range");
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    const double lse = mx + std::log(z);
    XentResult r;
    r.loss = lse - logits[label];
    r.grad.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) r.grad[i] = std::exp(logits[i] - lse);
    r.grad[label] -= 1.0;
    return r;
}

double clip_global_norm(std::span<double> grads, double max_norm) {
    if (!(max_norm > 0)) throw std::invalid_argument("max_norm must be positive");
    double s = 0.0;
    for (double g : grads) s += g * g;
    const double norm = std::sqrt(s);
    if (norm > max_norm) {
        const double scale = max_norm / norm;
        for (double& g : grads) g *= scale;
    }
    return norm;
}

Standardizer::Standardizer(Eigen::Index f)
    : running_mean(Vec::Zero(f)), running_var(Vec::Ones(f)), gamma(Vec::Ones(f)), beta(Vec::Zero(f)) {}

Mat standardize_batch(Standardizer& st, const Mat& x, bool training, BnCache* cache) {
    if (x.rows() == 0) throw std::invalid_argument("empty batch");
    if (x.cols() != st.features()) throw std::invalid_argument("feature dimension mismatch");
    const double bsz = static_cast<double>(x.rows());
    Vec mean, var;
    if (training) {
        mean = x.colwise().mean().transpose();
        var = (x.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
        const double unbias = x.rows() > 1 ? bsz / (bsz - 1.0) : 1.0;
        st.running_mean = (1.0 - st.momentum) * st.running_mean + st.momentum * mean;
        st.running_var = (1.0 - st.momentum) * st.running_var + st.momentum * unbias * var;
    } else {
        mean = st.running_mean;
        var = st.running_var;
    }
    Vec inv_std = (var.array() + st.eps).rsqrt();
    Mat xhat = (x.rowwise() - mean.transpose()).array().rowwise() * inv_std.transpose().array();
    Mat y = (xhat.array().rowwise() * st.gamma.transpose().array()).rowwise() + st.beta.transpose().array();
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

Vec ProbeModel::features(const Mat& s) const {
    if (metric) return flatten(metric->forward(s));
    Mat w = inv_sqrt(airm_mean);
    return flatten(sym_log(symmetrize(w * s * w)));
}

Vec ProbeModel::logits(const Mat& s) const {
    Vec x = features(s);
    if (x.size() != bn.features()) throw std::invalid_argument("dimension mismatch");
    Vec xh = (x - bn.running_mean).array() / (bn.running_var.array() + bn.eps).sqrt();
    return w * (xh.cwiseProduct(bn.gamma) + bn.beta) + b;
}

int ProbeModel::predict(const Mat& s) const { return argmax_low(logits(s)); }

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(const std::vector<int>& labels,
                                                                               double fraction,
                                                                               unsigned long long seed) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> keep, held;
    for (auto& [label, idx] : by_class) {
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto n_held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
        held.insert(held.end(), idx.begin(), idx.begin() + std::min(n_held, idx.size()));
        keep.insert(keep.end(), idx.begin() + std::min(n_held, idx.size()), idx.end());
    }
    std::sort(keep.begin(), keep.end());
    std::sort(held.begin(), held.end());
    return {keep, held};
}

TrainResult train_probe(const LabeledSpdDataset& data, const PullbackMetric& metric, const TrainConfig& config) {
    data.validate();
    if (data.size() == 0) throw std::invalid_argument("empty dataset");
    FeatureSource src;
    src.prep.reserve(data.size());
    for (const auto& s : data.matrices) src.prep.push_back(metric.prepare(s));
    ProbeModel m;
    m.metric = metric;
    return train_core(std::move(m), src, data.labels, data.classes(), data.dim() * data.dim(), config);
}

TrainResult train_airm_probe(const LabeledSpdDataset& data, const TrainConfig& config) {
    data.validate();
    if (data.size() == 0) throw std::invalid_argument("empty dataset");
    ProbeModel m;
    m.airm_mean = le_mean(data.matrices);
    FeatureSource src;
    src.fixed = airm_probe_features(data.matrices, m.airm_mean);
    return train_core(std::move(m), src, data.labels, data.classes(), data.dim() * data.dim(), config);
}

double evaluate(const ProbeModel& model, const LabeledSpdDataset& data) {
    if (data.size() == 0) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (model.predict(data.matrices[i]) == data.labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

double probe_batch_loss(const ProbeModel& model, const std::vector<Mat>& xs, const std::vector<int>& ys,
                        std::vector<double>* spline_grad) {
    FeatureSource src;
    for (const auto& s : xs) {
        if (model.metric) src.prep.push_back(model.metric->prepare(s));
    }
    if (!model.metric) src.fixed = airm_probe_features(xs, model.airm_mean);
    Standardizer bn = model.bn;
    std::vector<std::size_t> idx(xs.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto pass = train_pass(model, bn, src, idx, ys, spline_grad != nullptr);
    if (spline_grad) spline_grad->assign(pass.grad.begin(), pass.grad.begin() + spline_size(model));
    return pass.loss;
}

Mat le_mean(const std::vector<Mat>& matrices) {
    if (matrices.empty()) throw std::invalid_argument("empty point set");
    Mat acc = Mat::Zero(matrices[0].rows(), matrices[0].cols());
    for (const auto& s : matrices) acc += sym_log(s);
    return sym_exp(acc / static_cast<double>(matrices.size()));
}

std::vector<Vec> airm_probe_features(const std::vector<Mat>& matrices, const Mat& global_mean) {
    Mat w = inv_sqrt(global_mean);
    std::vector<Vec> out;
    out.reserve(matrices.size());
    for (const auto& s : matrices) out.push_back(flatten(sym_log(symmetrize(w * s * w))));
    return out;
}

void write_history_jsonl(std::ostream& os, const std::vector<EpochRecord>& history) {
    char buf[256];
    for (const auto& r : history) {
        std::snprintf(buf, sizeof buf, "{\"epoch\": %d, \"train_loss\": %.17g, \"train_acc\": %.17g, \"val_acc\": %.17g}\n",
                      r.epoch, r.train_loss, r.train_acc, r.val_acc);
        os << buf;
    }
}

}  // namespace spm
