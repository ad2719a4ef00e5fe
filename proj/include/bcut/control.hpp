#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bcut/classifier.hpp"
#include "bcut/dmp.hpp"
#include "bcut/world.hpp"

namespace bcut {

enum class Mode { OpenLoop, ClosedLoop };
enum class Outcome { Success, StuckInPeel, IncompleteExtraction };

const char* to_string(Mode m) noexcept;
const char* to_string(Outcome o) noexcept;
Mode parse_mode(const std::string& s);
Outcome parse_outcome(const std::string& s);

// Per-step directional gain K_t = kappa * u_t. Steps before `half_split`
// push toward the world center, later steps push along +y.
struct GainSchedule {
    double kappa = 0.02;
    std::vector<Vec2> directions;
    std::size_t half_split = 0;

    static GainSchedule toward_center_then_up(double kappa, const std::vector<Vec2>& nominal,
                                              const Vec2& center, std::size_t half_split);
};

// Delta_t = kappa * u_t * (pr_peel - 0.5).
Vec2 correction(double pr_peel, std::size_t step, const GainSchedule& schedule);

// What the estimator may look at after a world step. Only the learned model
// is restricted to torques and time index; the oracle reads the geometry.
struct Observation {
    Eigen::VectorXd torques;
    double time_index = 0.0;
    Vec2 tip = Vec2::Zero();
    double signed_distance = 0.0;
};

using PeelEstimator = std::function<double(const Observation&)>;

PeelEstimator model_estimator(LogisticModel model);
PeelEstimator constant_estimator(double pr);
PeelEstimator oracle_estimator();

struct TrialRecord {
    int trial_id = 0;
    std::uint64_t seed = 0;
    Mode mode = Mode::OpenLoop;
    std::vector<Vec2> nominal_path;    // y_t, one per recorded step
    std::vector<Vec2> corrected_path;  // y'_t as commanded
    std::vector<Vec2> tip_path;        // tip reached after IK
    std::vector<Eigen::VectorXd> torques;
    std::vector<double> time_index;
    std::vector<double> pr_trace;
    std::vector<double> signed_distance;
    Outcome outcome = Outcome::Success;
    bool truncated = false;  // IK failed with the tip in the peel

    std::size_t steps() const noexcept { return tip_path.size(); }
};

struct OutcomeCriteria {
    double d_stuck = 0.003;
    double d_margin = 0.005;
    double coverage_min = 0.7;
    double goal_tol = 0.005;

    bool operator==(const OutcomeCriteria&) const = default;
};

// Uses only the recorded tip path, the final nominal point (the goal) and the world geometry.
Outcome judge_outcome(const TrialRecord& record, const MediumWorld& world, const OutcomeCriteria& criteria);

struct TrialOptions {
    std::size_t snapshots = 24;
    // DMP integration substeps between consecutive snapshots.
    std::size_t substeps = 100;
};

// Nominal Cartesian points at the T snapshot times; element 0 is the start pose.
std::vector<Vec2> sample_nominal(const Dmp& dmp, const TrialOptions& options);

struct TrialInputs {
    const std::vector<Vec2>* nominal = nullptr;  // T + 1 points from sample_nominal
    double step_dt = 0.1;                        // seconds between snapshots
    const MediumWorld* world = nullptr;
    PlanarArm arm;
    const PeelEstimator* estimator = nullptr;
    const GainSchedule* schedule = nullptr;
    Mode mode = Mode::OpenLoop;
    OutcomeCriteria criteria;
    int trial_id = 0;
    std::uint64_t seed = 0;
};

// One scooping execution. Torque noise is drawn from an RNG seeded with `seed`.
// The estimator runs in both modes so that open-loop records carry Pr(peel) too.
TrialRecord run_trial(const TrialInputs& inputs);

// Convenience overload that rolls out the DMP itself.
TrialRecord run_trial(const Dmp& dmp, const MediumWorld& world, const PlanarArm& arm,
                      const PeelEstimator* estimator, const GainSchedule* schedule, Mode mode,
                      const TrialOptions& options = {}, const OutcomeCriteria& criteria = {},
                      int trial_id = 0, std::uint64_t seed = 0);

} // namespace bcut
