#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bcut/classifier.hpp"
#include "bcut/config.hpp"
#include "bcut/control.hpp"
#include "bcut/dmp.hpp"
#include "bcut/world.hpp"

namespace bcut {

// Trial ids used by compare start here so their worlds never coincide with collect's.
inline constexpr int kCompareTrialIdBase = 1000000;

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

MediumWorld world_for_trial(const ExperimentConfig& config, int trial_id);
MediumWorld prior_world(const ExperimentConfig& config);
PlanarArm make_arm(const ExperimentConfig& config);

// Parallel map over [0, n) honoring BOUNDARY_CUT_THREADS; results keep index order.
std::size_t worker_threads();
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

Trajectory demo_gen(const ExperimentConfig& config);

// Everything the trial loops need, derived once from the config.
struct Pipeline {
    Dmp dmp;
    std::vector<Vec2> nominal;
    double step_dt = 0.0;
    PlanarArm arm;
};

Pipeline make_pipeline(const ExperimentConfig& config);
Pipeline make_pipeline(const ExperimentConfig& config, Dmp dmp);

struct CollectResult {
    std::vector<TrialRecord> records;
    std::vector<TorqueTrace> traces;  // kept for the classifier dataset
    std::size_t successes = 0;
    std::size_t stuck = 0;
    std::size_t incomplete = 0;
    std::size_t excluded = 0;  // incomplete or truncated records
};

CollectResult collect(const ExperimentConfig& config, const Pipeline& pipeline);

// Labels: StuckInPeel -> Peel, Success -> Pulp; other outcomes and truncated
// records are dropped.
std::vector<TorqueTrace> traces_from_records(const std::vector<TrialRecord>& records, std::size_t snapshots);

struct TrainClfResult {
    LogisticModel model;
    CvReport cv;
    Metrics test;
    std::vector<int> train_ids;
    std::vector<int> test_ids;
};

TrainClfResult train_clf(const std::vector<TorqueTrace>& traces, const ExperimentConfig& config);

struct ModeSummary {
    Mode mode = Mode::OpenLoop;
    std::size_t trials = 0;
    std::size_t successful = 0;
    std::size_t failed = 0;
    std::size_t stuck = 0;
    std::size_t incomplete = 0;
    double success_rate = 0.0;
};

struct RunSummary {
    std::vector<ModeSummary> modes;
    std::optional<Metrics> classifier;
    std::vector<std::string> artifacts;  // file names relative to the output directory
};

struct CompareResult {
    std::vector<TrialRecord> open;
    std::vector<TrialRecord> closed;
    std::vector<std::uint64_t> world_hashes;  // one per paired world
    RunSummary summary;
};

CompareResult compare(const ExperimentConfig& config, const Pipeline& pipeline,
                      const PeelEstimator& estimator, const std::vector<Mode>& modes = {Mode::OpenLoop, Mode::ClosedLoop});

ModeSummary summarize(Mode mode, const std::vector<TrialRecord>& records);

struct StatsRow {
    std::size_t joint = 0;       // 1-based
    std::size_t time_index = 0;  // 1-based
    Medium label = Medium::Pulp;
    std::size_t count = 0;
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation; 0 for fewer than two traces
};

std::vector<StatsRow> stats(const std::vector<TorqueTrace>& traces, std::size_t joints, std::size_t snapshots);

struct ReplayResult {
    int trial_id = 0;
    Mode mode = Mode::OpenLoop;
    Outcome stored = Outcome::Success;
    Outcome rejudged = Outcome::Success;
};

std::vector<ReplayResult> replay(const ExperimentConfig& config, const std::vector<TrialRecord>& records);

// Trial CSV: trial_id, mode, step, time_index, tau_1..tau_J, x_tip, y_tip,
// x_nominal, y_nominal, pr_peel, d_signed, outcome.
void write_trial_csv(std::ostream& out, const std::vector<TrialRecord>& records, std::size_t joints);
std::vector<TrialRecord> read_trial_csv(std::istream& in, std::size_t expected_steps = 0);

void write_demo_csv(std::ostream& out, const Trajectory& demo);
Trajectory read_demo_csv(std::istream& in);

void write_stats_csv(std::ostream& out, const std::vector<StatsRow>& rows);
void write_summary_csv(std::ostream& out, const RunSummary& summary);
nlohmann::ordered_json to_json(const RunSummary& summary);

} // namespace bcut
