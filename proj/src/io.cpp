#include "spm/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace spm {

namespace {

using nlohmann::json;

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json mat_to_json(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

Mat mat_from_json(const json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (static_cast<Eigen::Index>(j[i].size()) != cols) throw FormatError("ragged matrix");
        for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
    }
    return m;
}

json vec_to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec vec_from_json(const json& j) {
    auto v = j.get<std::vector<double>>();
    return Eigen::Map<Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void write_dataset(std::ostream& os, const LabeledSpdDataset& data) {
    data.validate();
    const Eigen::Index n = data.dim();
    os << "spd v1 " << n << ' ' << data.size() << ' ' << data.classes() << '\n';
    for (std::size_t s = 0; s < data.size(); ++s) {
        os << data.labels[s];
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i; j < n; ++j) os << ' ' << fmt17(data.matrices[s](i, j));
        os << '\n';
    }
}

LabeledSpdDataset read_dataset(std::istream& is, bool project) {
    std::string line;
    if (!std::getline(is, line)) throw FormatError("empty dataset file");
    std::istringstream hs(line);
    std::string magic, version, extra;
    long long dim = 0, count = 0, classes = 0;
    if (!(hs >> magic >> version >> dim >> count >> classes) || magic != "spd" || version != "v1" || (hs >> extra))
        throw FormatError("header must be 'spd v1 <dim> <count> <classes>', got: " + line);
    if (dim < 1 || count < 0 || classes < 1) throw FormatError("header values out of range: " + line);

    LabeledSpdDataset d;
    const long long per = dim * (dim + 1) / 2;
    long long lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (static_cast<long long>(d.size()) == count) throw FormatError("more records than the header count");
        std::istringstream rs(line);
        long long label = 0;
        if (!(rs >> label) || label < 0 || label >= classes)
            throw FormatError("line " + std::to_string(lineno) + ": bad label");
        Mat m(dim, dim);
        for (long long i = 0; i < dim; ++i)
            for (long long j = i; j < dim; ++j) {
                std::string tok;
                if (!(rs >> tok)) throw FormatError("line " + std::to_string(lineno) + ": expected " +
                                                    std::to_string(per) + " values");
                std::size_t used = 0;
                double v = 0.0;
                try {
                    v = std::stod(tok, &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                if (used != tok.size()) throw FormatError("line " + std::to_string(lineno) + ": bad number '" + tok + "'");
                m(i, j) = m(j, i) = v;
            }
        if (std::string tok; rs >> tok) throw FormatError("line " + std::to_string(lineno) + ": trailing values");
        try {
            d.matrices.push_back(SpdMatrix(m, project).mat());
        } catch (const std::exception& e) {
            throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
        }
        d.labels.push_back(static_cast<int>(label));
    }
    if (static_cast<long long>(d.size()) != count)
        throw FormatError("header announces " + std::to_string(count) + " records, found " + std::to_string(d.size()));
    return d;
}

void save_dataset(const std::string& path, const LabeledSpdDataset& data) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    write_dataset(os, data);
}

LabeledSpdDataset load_dataset(const std::string& path, bool project) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open " + path);
    return read_dataset(is, project);
}

std::string model_to_json(const ProbeModel& model) {
    json j;
    if (model.metric) {
        const auto& m = *model.metric;
        j["metric"] = m.name();
        j["theta"] = m.theta();
        j["eig_jitter"] = m.eig_jitter;
        j["delta"] = m.delta;
        j["chol_jitter"] = m.chol_jitter;
        if (m.has_spline()) j["spline"] = json::parse(m.spline().to_json());
    } else {
        j["metric"] = "airm";
        j["airm_mean"] = mat_to_json(model.airm_mean);
    }
    j["bn"] = {{"running_mean", vec_to_json(model.bn.running_mean)},
               {"running_var", vec_to_json(model.bn.running_var)},
               {"gamma", vec_to_json(model.bn.gamma)},
               {"beta", vec_to_json(model.bn.beta)},
               {"momentum", model.bn.momentum},
               {"eps", model.bn.eps}};
    j["w"] = mat_to_json(model.w);
    j["b"] = vec_to_json(model.b);
    return j.dump(2);
}

ProbeModel model_from_json(const std::string& text) {
    try {
        json j = json::parse(text);
        ProbeModel model;
        const std::string name = j.at("metric").get<std::string>();
        if (name == "airm") {
            model.airm_mean = mat_from_json(j.at("airm_mean"));
        } else {
            SplineCurve curve = j.contains("spline") ? SplineCurve::from_json(j["spline"].dump()) : identity_curve();
            std::string spec = name;
            if (name.rfind("pcm", 0) == 0) spec = "pcm" + fmt17(j.at("theta").get<double>());
            PullbackMetric m = parse_metric(spec, curve, true);
            m.eig_jitter = j.value("eig_jitter", m.eig_jitter);
            m.delta = j.value("delta", m.delta);
            m.chol_jitter = j.value("chol_jitter", m.chol_jitter);
            model.metric = m;
        }
        const json& bn = j.at("bn");
        model.bn.running_mean = vec_from_json(bn.at("running_mean"));
        model.bn.running_var = vec_from_json(bn.at("running_var"));
        model.bn.gamma = vec_from_json(bn.at("gamma"));
        model.bn.beta = vec_from_json(bn.at("beta"));
        model.bn.momentum = bn.value("momentum", 0.1);
        model.bn.eps = bn.value("eps", 1e-5);
        model.w = mat_from_json(j.at("w"));
        model.b = vec_from_json(j.at("b"));
        const Eigen::Index f = model.bn.gamma.size();
        if (model.w.cols() != f || model.b.size() != model.w.rows() || model.bn.running_mean.size() != f ||
            model.bn.running_var.size() != f || model.bn.beta.size() != f)
            throw FormatError("inconsistent model dimensions");
        return model;
    } catch (const FormatError&) {
        throw;
    } catch (const std::exception& e) {
        throw FormatError(std::string("invalid model: ") + e.what());
    }
}

void save_model(const std::string& path, const ProbeModel& model) { write_text(path, model_to_json(model) + "\n"); }

ProbeModel load_model(const std::string& path) { return model_from_json(read_text(path)); }

SplineCurve load_spline(const std::string& path) {
    try {
        json j = json::parse(read_text(path));
        if (j.contains("spline")) j = j["spline"];
        return SplineCurve::from_json(j.dump());
    } catch (const FormatError&) {
        throw;
    } catch (const std::exception& e) {
        throw FormatError(std::string("invalid spline model: ") + e.what());
    }
}

std::string read_text(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << text;
    if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace spm
