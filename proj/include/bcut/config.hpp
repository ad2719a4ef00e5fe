#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "bcut/classifier.hpp"
#include "bcut/control.hpp"
#include "bcut/dmp.hpp"
#include "bcut/world.hpp"

namespace bcut {

struct Range {
    double lo = 0.0;
    double hi = 0.0;

    bool operator==(const Range&) const = default;
};

struct WorldRandomization {
    double center_x = 0.0;
    double center_y = 0.0;
    double base_radius = 0.04;
    std::vector<int> harmonic_orders{1, 2, 3};
    // Amplitude of each harmonic is drawn uniformly from [0, amplitude_max].
    std::vector<double> amplitude_max{0.005, 0.005, 0.005};
    Range mu_pulp{4.0, 6.0};
    Range mu_peel{14.0, 18.0};
    Range peel_penalty{600.0, 600.0};
    // About 10% of the noise-free pulp torque norm (~0.029 N m along the nominal cut).
    Range noise_sigma{0.003, 0.003};

    bool operator==(const WorldRandomization&) const = default;
};

struct ArmConfig {
    double base_x = -0.10;
    double base_y = 0.15;
    std::vector<double> link_lengths{0.12, 0.10, 0.06};
    std::vector<double> initial_angles{-0.6, -0.9, -0.6};

    bool operator==(const ArmConfig&) const = default;
};

// Scripted demonstration: an arc inside the prior (unperturbed) boundary,
// traversed with minimum-jerk timing.
struct DemoConfig {
    double start_angle = 3.141592653589793;  // rad, insertion point on the rim
    double end_angle = 5.1;                  // rad, extraction pose past the bottom
    double inset = 0.001;                    // m inside the prior boundary
    double duration = 2.4;                   // s
    std::size_t samples = 2401;

    bool operator==(const DemoConfig&) const = default;
};

struct ClassifierConfig {
    TrainOptions train;
    std::size_t k_folds = 10;
    // Share of kept traces used for training and validation; the rest is held out.
    double train_fraction = 90.0 / 111.0;

    bool operator==(const ClassifierConfig&) const = default;
};

struct ControllerConfig {
    double kappa = 0.02;
    std::size_t half_split = 12;
    OutcomeCriteria criteria;

    bool operator==(const ControllerConfig&) const = default;
};

struct ExperimentConfig {
    std::uint64_t master_seed = 20190317;
    std::size_t n_trials = 111;   // collect
    std::size_t n_compare = 200;  // compare, per mode
    std::size_t snapshots = 24;
    WorldRandomization world;
    ArmConfig arm;
    DemoConfig demo;
    DmpConfig dmp;
    ClassifierConfig classifier;
    ControllerConfig controller;
    std::string output_dir = "out";

    // Throws InvalidArgument on empty ranges or inconsistent sizes.
    void validate() const;

    bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::ordered_json to_json(const ExperimentConfig& config);
// Missing keys keep their defaults; present keys are type-checked.
ExperimentConfig config_from_json(const nlohmann::ordered_json& doc);

ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& config, const std::string& path);

} // namespace bcut
