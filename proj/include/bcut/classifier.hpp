#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

#include "bcut/world.hpp"

namespace bcut {

// One torque snapshot: J joint torques followed by the time index.
struct Sample {
    std::vector<double> features;
    Medium label = Medium::Pulp;
    int trial_id = 0;
};

// All snapshots of one trial; every sample carries the trial's label.
struct TorqueTrace {
    int trial_id = 0;
    Medium label = Medium::Pulp;
    std::vector<Sample> samples;
};

std::vector<Sample> flatten(std::span<const TorqueTrace> traces);

struct Standardizer {
    std::vector<double> means;
    std::vector<double> stds;

    static Standardizer identity(std::size_t features);
    // Zero-variance features keep a unit scale.
    static Standardizer fit(std::span<const Sample> samples);
    std::vector<double> apply(std::span<const double> x) const;
};

// Linear logistic model for Pr(peel | torques, time index).
// `weights` has one entry per input feature; the intercept lives in `bias`
// and is not regularized. Inputs are standardized before the linear map.
struct LogisticModel {
    std::vector<double> weights;
    double bias = 0.0;
    double lambda = 0.0;
    Standardizer standardizer;

    std::size_t features() const noexcept { return weights.size(); }
    double weight_norm() const;
};

double sigmoid(double z);

// Negative log-likelihood plus (lambda/2)|w|^2 over already-standardized samples.
double cost(const LogisticModel& model, std::span<const Sample> samples);

// Gradient of cost(); the bias derivative is the last entry.
std::vector<double> gradient(const LogisticModel& model, std::span<const Sample> samples);

double predict_proba(const LogisticModel& model, std::span<const double> features);

struct TrainOptions {
    double lambda = 0.1;
    double learning_rate = 0.1;
    double tol = 1e-6;
    int max_iters = 5000;

    bool operator==(const TrainOptions&) const = default;
};

struct TrainReport {
    LogisticModel model;
    int iterations = 0;
    bool converged = false;
    std::vector<double> cost_history;  // one entry per accepted iterate, starting at w = 0
};

// Full-batch gradient descent with step halving. Throws InvalidArgument when
// the samples do not contain both classes.
TrainReport train(std::span<const Sample> samples, const TrainOptions& options);

struct Confusion {
    long tp = 0;  // actual peel, predicted peel
    long fn = 0;
    long fp = 0;
    long tn = 0;

    long total() const noexcept { return tp + fn + fp + tn; }
    Confusion& operator+=(const Confusion& o) noexcept {
        tp += o.tp;
        fn += o.fn;
        fp += o.fp;
        tn += o.tn;
        return *this;
    }
    bool operator==(const Confusion&) const = default;
};

struct Metrics {
    Confusion counts;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double misclassification_rate = 0.0;

    // Half-up rounding to two decimals, computed from the integer counts.
    double sensitivity_2dp = 0.0;
    double specificity_2dp = 0.0;
    double misclassification_2dp = 0.0;
};

Metrics metrics_from_confusion(long tp, long fn, long fp, long tn);
Metrics metrics_from_confusion(const Confusion& c);

// Peel is predicted when Pr(peel) >= 0.5.
Confusion evaluate(const LogisticModel& model, std::span<const Sample> samples);

struct CvReport {
    Metrics pooled;
    std::vector<std::vector<int>> folds;  // trial ids held out in each fold
};

// Folds are contiguous blocks of `traces` in the given order; their sizes
// differ by at most one trace.
CvReport kfold_cv(std::span<const TorqueTrace> traces, std::size_t k, const TrainOptions& options);

nlohmann::ordered_json to_json(const LogisticModel& model);
LogisticModel model_from_json(const nlohmann::ordered_json& doc);

nlohmann::ordered_json to_json(const Metrics& metrics);

} // namespace bcut
