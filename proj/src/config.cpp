#include "bcut/config.hpp"

#include <fstream>
#include <sstream>

#include "bcut/errors.hpp"

namespace bcut {

namespace {

using ojson = nlohmann::ordered_json;

ojson range_json(const Range& r) {
    return ojson::array({r.lo, r.hi});
}

void read_range(const ojson& doc, const char* key, Range& out) {
    if (!doc.contains(key)) {
        return;
    }
    const auto v = doc.at(key).get<std::vector<double>>();
    if (v.size() != 2) {
        throw InvalidArgument(std::string("range '") + key + "' needs exactly two values");
    }
    out = {v[0], v[1]};
}

template <typename T>
void read(const ojson& doc, const char* key, T& out) {
    if (doc.contains(key)) {
        out = doc.at(key).get<T>();
    }
}

void check_range(const Range& r, const char* name, bool positive) {
    if (!(r.lo <= r.hi)) {
        throw InvalidArgument(std::string("range '") + name + "' is empty");
    }
    if (positive && !(r.lo > 0.0)) {
        throw InvalidArgument(std::string("range '") + name + "' must be positive");
    }
}

} // namespace

void ExperimentConfig::validate() const {
    if (n_trials < 1 || n_compare < 1 || snapshots < 1) {
        throw InvalidArgument("n_trials, n_compare and snapshots must be at least 1");
    }
    if (world.harmonic_orders.size() != world.amplitude_max.size()) {
        throw InvalidArgument("harmonic_orders and amplitude_max must have the same length");
    }
    double total_amplitude = 0.0;
    for (double a : world.amplitude_max) {
        if (a < 0.0) {
            throw InvalidArgument("amplitude_max entries must be non-negative");
        }
        total_amplitude += a;
    }
    if (!(world.base_radius > total_amplitude)) {
        throw InvalidArgument("perturbation amplitudes could make the boundary radius non-positive");
    }
    check_range(world.mu_pulp, "mu_pulp", true);
    check_range(world.mu_peel, "mu_peel", true);
    if (!(world.mu_peel.lo > world.mu_pulp.hi)) {
        throw InvalidArgument("mu_peel range must lie strictly above the mu_pulp range");
    }
    check_range(world.peel_penalty, "peel_penalty", false);
    check_range(world.noise_sigma, "noise_sigma", false);
    if (world.peel_penalty.lo < 0.0 || world.noise_sigma.lo < 0.0) {
        throw InvalidArgument("peel_penalty and noise_sigma must be non-negative");
    }
    if (arm.link_lengths.size() < 2 || arm.link_lengths.size() != arm.initial_angles.size()) {
        throw InvalidArgument("arm needs at least two links and one initial angle per link");
    }
    if (!(demo.duration > 0.0) || demo.samples < 2) {
        throw InvalidArgument("demo needs a positive duration and at least two samples");
    }
    if (dmp.basis_count < 1 || !(dmp.alpha_x > 0.0) || !(dmp.alpha_z > 0.0)) {
        throw InvalidArgument("dmp needs basis_count >= 1 and positive rates");
    }
    if (classifier.k_folds < 2 || !(classifier.train_fraction > 0.0 && classifier.train_fraction < 1.0)) {
        throw InvalidArgument("classifier needs k_folds >= 2 and train_fraction in (0, 1)");
    }
    if (classifier.train.lambda < 0.0 || !(classifier.train.learning_rate > 0.0)
        || classifier.train.max_iters < 1) {
        throw InvalidArgument("classifier training options are out of range");
    }
    if (controller.kappa < 0.0 || controller.half_split > snapshots) {
        throw InvalidArgument("controller needs kappa >= 0 and half_split <= snapshots");
    }
}

ojson to_json(const ExperimentConfig& c) {
    ojson doc;
    doc["master_seed"] = c.master_seed;
    doc["n_trials"] = c.n_trials;
    doc["n_compare"] = c.n_compare;
    doc["snapshots"] = c.snapshots;

    ojson w;
    w["center"] = {c.world.center_x, c.world.center_y};
    w["base_radius"] = c.world.base_radius;
    w["harmonic_orders"] = c.world.harmonic_orders;
    w["amplitude_max"] = c.world.amplitude_max;
    w["mu_pulp"] = range_json(c.world.mu_pulp);
    w["mu_peel"] = range_json(c.world.mu_peel);
    w["peel_penalty"] = range_json(c.world.peel_penalty);
    w["noise_sigma"] = range_json(c.world.noise_sigma);
    doc["world"] = std::move(w);

    ojson a;
    a["base"] = {c.arm.base_x, c.arm.base_y};
    a["link_lengths"] = c.arm.link_lengths;
    a["initial_angles"] = c.arm.initial_angles;
    doc["arm"] = std::move(a);

    ojson d;
    d["start_angle"] = c.demo.start_angle;
    d["end_angle"] = c.demo.end_angle;
    d["inset"] = c.demo.inset;
    d["duration"] = c.demo.duration;
    d["samples"] = c.demo.samples;
    doc["demo"] = std::move(d);

    ojson m;
    m["N"] = c.dmp.basis_count;
    m["alpha_x"] = c.dmp.alpha_x;
    m["alpha_z"] = c.dmp.alpha_z;
    m["tau"] = c.dmp.tau;
    doc["dmp"] = std::move(m);

    ojson k;
    k["lambda"] = c.classifier.train.lambda;
    k["learning_rate"] = c.classifier.train.learning_rate;
    k["tol"] = c.classifier.train.tol;
    k["max_iters"] = c.classifier.train.max_iters;
    k["k_folds"] = c.classifier.k_folds;
    k["train_fraction"] = c.classifier.train_fraction;
    doc["classifier"] = std::move(k);

    ojson g;
    g["kappa"] = c.controller.kappa;
    g["half_split"] = c.controller.half_split;
    g["d_stuck"] = c.controller.criteria.d_stuck;
    g["d_margin"] = c.controller.criteria.d_margin;
    g["coverage_min"] = c.controller.criteria.coverage_min;
    g["goal_tol"] = c.controller.criteria.goal_tol;
    doc["controller"] = std::move(g);

    doc["output_dir"] = c.output_dir;
    return doc;
}

ExperimentConfig config_from_json(const ojson& doc) {
    ExperimentConfig c;
    try {
        read(doc, "master_seed", c.master_seed);
        read(doc, "n_trials", c.n_trials);
        read(doc, "n_compare", c.n_compare);
        read(doc, "snapshots", c.snapshots);
        if (doc.contains("world")) {
            const auto& w = doc.at("world");
            if (w.contains("center")) {
                const auto v = w.at("center").get<std::vector<double>>();
                if (v.size() != 2) {
                    throw InvalidArgument("world.center needs two values");
                }
                c.world.center_x = v[0];
                c.world.center_y = v[1];
            }
            read(w, "base_radius", c.world.base_radius);
            read(w, "harmonic_orders", c.world.harmonic_orders);
            read(w, "amplitude_max", c.world.amplitude_max);
            read_range(w, "mu_pulp", c.world.mu_pulp);
            read_range(w, "mu_peel", c.world.mu_peel);
            read_range(w, "peel_penalty", c.world.peel_penalty);
            read_range(w, "noise_sigma", c.world.noise_sigma);
        }
        if (doc.contains("arm")) {
            const auto& a = doc.at("arm");
            if (a.contains("base")) {
                const auto v = a.at("base").get<std::vector<double>>();
                if (v.size() != 2) {
                    throw InvalidArgument("arm.base needs two values");
                }
                c.arm.base_x = v[0];
                c.arm.base_y = v[1];
            }
            read(a, "link_lengths", c.arm.link_lengths);
            read(a, "initial_angles", c.arm.initial_angles);
        }
        if (doc.contains("demo")) {
            const auto& d = doc.at("demo");
            read(d, "start_angle", c.demo.start_angle);
            read(d, "end_angle", c.demo.end_angle);
            read(d, "inset", c.demo.inset);
            read(d, "duration", c.demo.duration);
            read(d, "samples", c.demo.samples);
        }
        if (doc.contains("dmp")) {
            const auto& m = doc.at("dmp");
            read(m, "N", c.dmp.basis_count);
            read(m, "alpha_x", c.dmp.alpha_x);
            read(m, "alpha_z", c.dmp.alpha_z);
            read(m, "tau", c.dmp.tau);
        }
        if (doc.contains("classifier")) {
            const auto& k = doc.at("classifier");
            read(k, "lambda", c.classifier.train.lambda);
            read(k, "learning_rate", c.classifier.train.learning_rate);
            read(k, "tol", c.classifier.train.tol);
            read(k, "max_iters", c.classifier.train.max_iters);
            read(k, "k_folds", c.classifier.k_folds);
            read(k, "train_fraction", c.classifier.train_fraction);
        }
        if (doc.contains("controller")) {
            const auto& g = doc.at("controller");
            read(g, "kappa", c.controller.kappa);
            read(g, "half_split", c.controller.half_split);
            read(g, "d_stuck", c.controller.criteria.d_stuck);
            read(g, "d_margin", c.controller.criteria.d_margin);
            read(g, "coverage_min", c.controller.criteria.coverage_min);
            read(g, "goal_tol", c.controller.criteria.goal_tol);
        }
        read(doc, "output_dir", c.output_dir);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed config: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config '" + path + "'");
    }
    ojson doc;
    try {
        doc = ojson::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("config '" + path + "' is not valid JSON: " + e.what());
    }
    return config_from_json(doc);
}

void save_config(const ExperimentConfig& config, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write config '" + path + "'");
    }
    out << to_json(config).dump(2) << '\n';
}

} // namespace bcut
