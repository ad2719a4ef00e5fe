#include "bcut/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bcut/errors.hpp"

namespace bcut {

namespace {

constexpr double kProbFloor = 1e-12;

double label_value(Medium m) {
    return m == Medium::Peel ? 1.0 : 0.0;
}

double linear_score(const LogisticModel& model, std::span<const double> x) {
    double z = model.bias;
    for (std::size_t i = 0; i < model.weights.size(); ++i) {
        z += model.weights[i] * x[i];
    }
    return z;
}

void check_dims(const LogisticModel& model, std::span<const Sample> samples) {
    for (const auto& s : samples) {
        if (s.features.size() != model.features()) {
            throw InvalidArgument("sample has " + std::to_string(s.features.size())
                                  + " features, model expects " + std::to_string(model.features()));
        }
    }
}

double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) {
        s += x * x;
    }
    return std::sqrt(s);
}

} // namespace

std::vector<Sample> flatten(std::span<const TorqueTrace> traces) {
    std::vector<Sample> out;
    for (const auto& t : traces) {
        out.insert(out.end(), t.samples.begin(), t.samples.end());
    }
    return out;
}

Standardizer Standardizer::identity(std::size_t features) {
    return {std::vector<double>(features, 0.0), std::vector<double>(features, 1.0)};
}

Standardizer Standardizer::fit(std::span<const Sample> samples) {
    if (samples.empty()) {
        throw InvalidArgument("cannot fit a standardizer on no samples");
    }
    const std::size_t f = samples.front().features.size();
    Standardizer st{std::vector<double>(f, 0.0), std::vector<double>(f, 0.0)};
    for (const auto& s : samples) {
        for (std::size_t i = 0; i < f; ++i) {
            st.means[i] += s.features[i];
        }
    }
    const double n = static_cast<double>(samples.size());
    for (auto& m : st.means) {
        m /= n;
    }
    for (const auto& s : samples) {
        for (std::size_t i = 0; i < f; ++i) {
            const double d = s.features[i] - st.means[i];
            st.stds[i] += d * d;
        }
    }
    for (auto& sd : st.stds) {
        sd = std::sqrt(sd / n);
        if (!(sd > 0.0)) {
            sd = 1.0;
        }
    }
    return st;
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = (x[i] - means[i]) / stds[i];
    }
    return out;
}

double LogisticModel::weight_norm() const {
    return norm(weights);
}

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double cost(const LogisticModel& model, std::span<const Sample> samples) {
    check_dims(model, samples);
    double j = 0.0;
    for (const auto& s : samples) {
        const double p = std::clamp(sigmoid(linear_score(model, s.features)), kProbFloor, 1.0 - kProbFloor);
        const double y = label_value(s.label);
        j += -y * std::log(p) - (1.0 - y) * std::log(1.0 - p);
    }
    const double wn = model.weight_norm();
    return j + 0.5 * model.lambda * wn * wn;
}

std::vector<double> gradient(const LogisticModel& model, std::span<const Sample> samples) {
    check_dims(model, samples);
    const std::size_t f = model.features();
    std::vector<double> g(f + 1, 0.0);
    for (const auto& s : samples) {
        const double r = sigmoid(linear_score(model, s.features)) - label_value(s.label);
        for (std::size_t i = 0; i < f; ++i) {
            g[i] += r * s.features[i];
        }
        g[f] += r;
    }
    for (std::size_t i = 0; i < f; ++i) {
        g[i] += model.lambda * model.weights[i];
    }
    return g;
}

double predict_proba(const LogisticModel& model, std::span<const double> features) {
    if (features.size() != model.features()) {
        throw InvalidArgument("feature vector has wrong length");
    }
    const auto x = model.standardizer.apply(features);
    return std::clamp(sigmoid(linear_score(model, x)), kProbFloor, 1.0 - kProbFloor);
}

TrainReport train(std::span<const Sample> samples, const TrainOptions& options) {
    bool has_peel = false;
    bool has_pulp = false;
    for (const auto& s : samples) {
        (s.label == Medium::Peel ? has_peel : has_pulp) = true;
    }
    if (!has_peel || !has_pulp) {
        throw InvalidArgument("training data must contain both pulp and peel samples");
    }
    if (options.lambda < 0.0 || !(options.learning_rate > 0.0)) {
        throw InvalidArgument("lambda must be >= 0 and learning_rate > 0");
    }

    const std::size_t f = samples.front().features.size();
    TrainReport report;
    LogisticModel& model = report.model;
    model.weights.assign(f, 0.0);
    model.lambda = options.lambda;
    model.standardizer = Standardizer::fit(samples);

    std::vector<Sample> scaled(samples.begin(), samples.end());
    for (auto& s : scaled) {
        s.features = model.standardizer.apply(s.features);
    }
    // Steps follow the per-sample mean gradient so the learning rate does not
    // depend on the dataset size; the objective itself is the summed cost.
    const double inv_n = 1.0 / static_cast<double>(scaled.size());

    double current = cost(model, scaled);
    report.cost_history.push_back(current);
    double step = options.learning_rate;
    for (int it = 0; it < options.max_iters; ++it) {
        const auto g = gradient(model, scaled);
        if (norm(g) < options.tol) {
            report.converged = true;
            break;
        }
        bool accepted = false;
        for (int halving = 0; halving < 60; ++halving) {
            LogisticModel candidate = model;
            for (std::size_t i = 0; i < f; ++i) {
                candidate.weights[i] -= step * inv_n * g[i];
            }
            candidate.bias -= step * inv_n * g[f];
            const double c = cost(candidate, scaled);
            if (c <= current) {
                model = std::move(candidate);
                current = c;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        report.iterations = it + 1;
        if (!accepted) {
            // No descent at any representable step: numerically at the optimum.
            report.converged = true;
            break;
        }
        report.cost_history.push_back(current);
        step *= 1.25;
    }
    return report;
}

namespace {

double round_2dp(long num, long den) {
    if (den == 0) {
        return std::nan("");
    }
    // floor(100 * num / den + 1/2) in exact integer arithmetic.
    const long hundredths = (200 * num + den) / (2 * den);
    return static_cast<double>(hundredths) / 100.0;
}

double ratio(long num, long den) {
    return den == 0 ? std::nan("") : static_cast<double>(num) / static_cast<double>(den);
}

} // namespace

Metrics metrics_from_confusion(long tp, long fn, long fp, long tn) {
    if (tp < 0 || fn < 0 || fp < 0 || tn < 0) {
        throw InvalidArgument("confusion counts must be non-negative");
    }
    Metrics m;
    m.counts = {tp, fn, fp, tn};
    const long total = tp + fn + fp + tn;
    m.sensitivity = ratio(tp, tp + fn);
    m.specificity = ratio(tn, tn + fp);
    m.misclassification_rate = ratio(fn + fp, total);
    m.sensitivity_2dp = round_2dp(tp, tp + fn);
    m.specificity_2dp = round_2dp(tn, tn + fp);
    m.misclassification_2dp = round_2dp(fn + fp, total);
    return m;
}

Metrics metrics_from_confusion(const Confusion& c) {
    return metrics_from_confusion(c.tp, c.fn, c.fp, c.tn);
}

Confusion evaluate(const LogisticModel& model, std::span<const Sample> samples) {
    Confusion c;
    for (const auto& s : samples) {
        const bool predicted_peel = predict_proba(model, s.features) >= 0.5;
        if (s.label == Medium::Peel) {
            (predicted_peel ? c.tp : c.fn) += 1;
        } else {
            (predicted_peel ? c.fp : c.tn) += 1;
        }
    }
    return c;
}

CvReport kfold_cv(std::span<const TorqueTrace> traces, std::size_t k, const TrainOptions& options) {
    if (k < 2 || k > traces.size()) {
        throw InvalidArgument("k must be in [2, number of traces]; got k=" + std::to_string(k)
                              + " with " + std::to_string(traces.size()) + " traces");
    }
    CvReport report;
    Confusion pooled;
    const std::size_t n = traces.size();
    std::size_t begin = 0;
    for (std::size_t fold = 0; fold < k; ++fold) {
        const std::size_t size = n / k + (fold < n % k ? 1 : 0);
        const std::size_t end = begin + size;
        std::vector<TorqueTrace> train_traces;
        std::vector<TorqueTrace> held_out;
        std::vector<int> ids;
        for (std::size_t i = 0; i < n; ++i) {
            if (i >= begin && i < end) {
                held_out.push_back(traces[i]);
                ids.push_back(traces[i].trial_id);
            } else {
                train_traces.push_back(traces[i]);
            }
        }
        const auto train_samples = flatten(train_traces);
        const auto test_samples = flatten(held_out);
        const auto fitted = train(train_samples, options);
        pooled += evaluate(fitted.model, test_samples);
        report.folds.push_back(std::move(ids));
        begin = end;
    }
    report.pooled = metrics_from_confusion(pooled);
    return report;
}

nlohmann::ordered_json to_json(const LogisticModel& model) {
    nlohmann::ordered_json doc;
    doc["J"] = model.features() == 0 ? 0 : model.features() - 1;
    doc["lambda"] = model.lambda;
    doc["weights"] = model.weights;
    doc["bias"] = model.bias;
    doc["means"] = model.standardizer.means;
    doc["stds"] = model.standardizer.stds;
    return doc;
}

LogisticModel model_from_json(const nlohmann::ordered_json& doc) {
    try {
        LogisticModel m;
        const auto joints = doc.at("J").get<std::size_t>();
        m.lambda = doc.at("lambda").get<double>();
        m.weights = doc.at("weights").get<std::vector<double>>();
        m.bias = doc.at("bias").get<double>();
        m.standardizer.means = doc.at("means").get<std::vector<double>>();
        m.standardizer.stds = doc.at("stds").get<std::vector<double>>();
        if (m.weights.size() != joints + 1 || m.standardizer.means.size() != joints + 1
            || m.standardizer.stds.size() != joints + 1) {
            throw InvalidArgument("model arrays must have J + 1 entries");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed model document: ") + e.what());
    }
}

nlohmann::ordered_json to_json(const Metrics& metrics) {
    nlohmann::ordered_json doc;
    doc["tp"] = metrics.counts.tp;
    doc["fn"] = metrics.counts.fn;
    doc["fp"] = metrics.counts.fp;
    doc["tn"] = metrics.counts.tn;
    doc["sensitivity"] = metrics.sensitivity_2dp;
    doc["specificity"] = metrics.specificity_2dp;
    doc["misclassification_rate"] = metrics.misclassification_2dp;
    return doc;
}

} // namespace bcut
