#include "bcut/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <istream>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include "bcut/errors.hpp"

namespace bcut {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t kSplitStream = 0x5350'4c49'5400ULL;  // "SPLIT"
constexpr std::uint64_t kNoiseStream = 1;

std::string fmt9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

double parse_double(const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) {
            throw InvalidArgument("trailing characters in number '" + s + "'");
        }
        return v;
    } catch (const std::logic_error&) {
        throw InvalidArgument("not a number: '" + s + "'");
    }
}

int parse_int(const std::string& s) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used != s.size()) {
            throw InvalidArgument("trailing characters in integer '" + s + "'");
        }
        return v;
    } catch (const std::logic_error&) {
        throw InvalidArgument("not an integer: '" + s + "'");
    }
}

double uniform(Rng& rng, const Range& r) {
    if (r.lo == r.hi) {
        return r.lo;
    }
    return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

} // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(master ^ splitmix64(stream));
}

MediumWorld world_for_trial(const ExperimentConfig& config, int trial_id) {
    const auto& wr = config.world;
    MediumWorld w;
    w.seed = derive_seed(config.master_seed, static_cast<std::uint64_t>(trial_id));
    Rng rng(w.seed);
    w.center = Vec2(wr.center_x, wr.center_y);
    w.base_radius = wr.base_radius;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t k = 0; k < wr.harmonic_orders.size(); ++k) {
        const double amplitude = wr.amplitude_max[k] * unit(rng);
        const double phase = 2.0 * std::numbers::pi * unit(rng);
        w.harmonics.push_back({wr.harmonic_orders[k], amplitude, phase});
    }
    w.mu_pulp = uniform(rng, wr.mu_pulp);
    w.mu_peel = uniform(rng, wr.mu_peel);
    w.peel_penalty = uniform(rng, wr.peel_penalty);
    w.noise_sigma = uniform(rng, wr.noise_sigma);
    w.validate();
    return w;
}

MediumWorld prior_world(const ExperimentConfig& config) {
    const auto& wr = config.world;
    MediumWorld w;
    w.center = Vec2(wr.center_x, wr.center_y);
    w.base_radius = wr.base_radius;
    w.mu_pulp = 0.5 * (wr.mu_pulp.lo + wr.mu_pulp.hi);
    w.mu_peel = 0.5 * (wr.mu_peel.lo + wr.mu_peel.hi);
    w.peel_penalty = 0.5 * (wr.peel_penalty.lo + wr.peel_penalty.hi);
    w.noise_sigma = 0.0;
    w.seed = config.master_seed;
    return w;
}

PlanarArm make_arm(const ExperimentConfig& config) {
    PlanarArm arm;
    arm.base = Vec2(config.arm.base_x, config.arm.base_y);
    arm.link_lengths = Eigen::Map<const Eigen::VectorXd>(config.arm.link_lengths.data(),
                                                         static_cast<Eigen::Index>(config.arm.link_lengths.size()));
    arm.joint_angles = Eigen::Map<const Eigen::VectorXd>(config.arm.initial_angles.data(),
                                                         static_cast<Eigen::Index>(config.arm.initial_angles.size()));
    return arm;
}

std::size_t worker_threads() {
    std::size_t cap = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("BOUNDARY_CUT_THREADS")) {
        const long requested = std::strtol(env, nullptr, 10);
        // An explicit request wins, even above the core count.
        if (requested >= 1) {
            cap = std::min<std::size_t>(static_cast<std::size_t>(requested), 256);
        }
    }
    return cap;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    const std::size_t threads = std::min(worker_threads(), n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

Trajectory demo_gen(const ExperimentConfig& config) {
    const auto& d = config.demo;
    const Vec2 center(config.world.center_x, config.world.center_y);
    const double radius = config.world.base_radius - d.inset;
    const double span = d.end_angle - d.start_angle;
    const double dt = d.duration / static_cast<double>(d.samples - 1);

    Trajectory traj;
    traj.dt = dt;
    for (std::size_t i = 0; i < d.samples; ++i) {
        const double s = static_cast<double>(i) / static_cast<double>(d.samples - 1);
        // Minimum-jerk profile in angle: zero velocity and acceleration at both ends.
        const double s3 = s * s * s;
        const double shape = s3 * (10.0 - 15.0 * s + 6.0 * s * s);
        const double shape_d = 30.0 * s * s * (1.0 - s) * (1.0 - s) / d.duration;
        const double shape_dd = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (d.duration * d.duration);
        const double phi = d.start_angle + span * shape;
        const double phi_d = span * shape_d;
        const double phi_dd = span * shape_dd;
        const Vec2 radial(std::cos(phi), std::sin(phi));
        const Vec2 tangential(-std::sin(phi), std::cos(phi));
        const Vec2 p = center + radius * radial;
        const Vec2 v = radius * phi_d * tangential;
        const Vec2 a = radius * (phi_dd * tangential - phi_d * phi_d * radial);
        traj.points.push_back({{p.x(), p.y()}, {v.x(), v.y()}, {a.x(), a.y()}});
    }
    return traj;
}

Pipeline make_pipeline(const ExperimentConfig& config) {
    return make_pipeline(config, fit_dmp(demo_gen(config), config.dmp));
}

Pipeline make_pipeline(const ExperimentConfig& config, Dmp dmp) {
    TrialOptions opts;
    opts.snapshots = config.snapshots;
    opts.substeps = (1000 + config.snapshots - 1) / config.snapshots;
    auto nominal = sample_nominal(dmp, opts);
    const double step_dt = dmp.tau() / static_cast<double>(config.snapshots);
    return Pipeline{std::move(dmp), std::move(nominal), step_dt, make_arm(config)};
}

namespace {

TrialRecord run_paired_trial(const ExperimentConfig& config, const Pipeline& pipeline, const MediumWorld& world,
                             int trial_id, Mode mode, const PeelEstimator* estimator,
                             const GainSchedule* schedule) {
    TrialInputs in;
    in.nominal = &pipeline.nominal;
    in.step_dt = pipeline.step_dt;
    in.world = &world;
    in.arm = pipeline.arm;
    in.estimator = estimator;
    in.schedule = schedule;
    in.mode = mode;
    in.criteria = config.controller.criteria;
    in.trial_id = trial_id;
    in.seed = derive_seed(world.seed, kNoiseStream);
    return run_trial(in);
}

} // namespace

std::vector<TorqueTrace> traces_from_records(const std::vector<TrialRecord>& records, std::size_t snapshots) {
    std::vector<TorqueTrace> traces;
    for (const auto& r : records) {
        if (r.truncated || r.steps() != snapshots || r.outcome == Outcome::IncompleteExtraction) {
            continue;
        }
        TorqueTrace t;
        t.trial_id = r.trial_id;
        t.label = r.outcome == Outcome::StuckInPeel ? Medium::Peel : Medium::Pulp;
        for (std::size_t s = 0; s < r.steps(); ++s) {
            Sample smp;
            smp.features.assign(r.torques[s].data(), r.torques[s].data() + r.torques[s].size());
            smp.features.push_back(r.time_index[s]);
            smp.label = t.label;
            smp.trial_id = r.trial_id;
            t.samples.push_back(std::move(smp));
        }
        traces.push_back(std::move(t));
    }
    return traces;
}

CollectResult collect(const ExperimentConfig& config, const Pipeline& pipeline) {
    CollectResult out;
    out.records.resize(config.n_trials);
    parallel_for(config.n_trials, [&](std::size_t i) {
        const int id = static_cast<int>(i);
        const MediumWorld world = world_for_trial(config, id);
        out.records[i] = run_paired_trial(config, pipeline, world, id, Mode::OpenLoop, nullptr, nullptr);
    });
    for (const auto& r : out.records) {
        switch (r.outcome) {
        case Outcome::Success:
            ++out.successes;
            break;
        case Outcome::StuckInPeel:
            ++out.stuck;
            break;
        case Outcome::IncompleteExtraction:
            ++out.incomplete;
            break;
        }
    }
    out.traces = traces_from_records(out.records, config.snapshots);
    out.excluded = out.records.size() - out.traces.size();
    return out;
}

TrainClfResult train_clf(const std::vector<TorqueTrace>& traces, const ExperimentConfig& config) {
    std::vector<TorqueTrace> shuffled = traces;
    Rng rng(derive_seed(config.master_seed, kSplitStream));
    std::shuffle(shuffled.begin(), shuffled.end(), rng);

    const std::size_t n = shuffled.size();
    const auto n_train = static_cast<std::size_t>(std::lround(config.classifier.train_fraction * static_cast<double>(n)));
    if (n_train < config.classifier.k_folds || n_train >= n) {
        throw InvalidArgument("dataset of " + std::to_string(n) + " traces is too small to split for "
                              + std::to_string(config.classifier.k_folds) + "-fold validation plus a test set");
    }
    std::vector<TorqueTrace> train_set(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<TorqueTrace> test_set(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train), shuffled.end());

    TrainClfResult out;
    for (const auto& t : train_set) {
        out.train_ids.push_back(t.trial_id);
    }
    for (const auto& t : test_set) {
        out.test_ids.push_back(t.trial_id);
    }
    out.cv = kfold_cv(train_set, config.classifier.k_folds, config.classifier.train);
    out.model = train(flatten(train_set), config.classifier.train).model;
    out.test = metrics_from_confusion(evaluate(out.model, flatten(test_set)));
    return out;
}

ModeSummary summarize(Mode mode, const std::vector<TrialRecord>& records) {
    ModeSummary s;
    s.mode = mode;
    s.trials = records.size();
    for (const auto& r : records) {
        if (r.outcome == Outcome::Success) {
            ++s.successful;
        } else {
            ++s.failed;
            (r.outcome == Outcome::StuckInPeel ? s.stuck : s.incomplete) += 1;
        }
    }
    s.success_rate = s.trials == 0 ? 0.0 : static_cast<double>(s.successful) / static_cast<double>(s.trials);
    return s;
}

CompareResult compare(const ExperimentConfig& config, const Pipeline& pipeline, const PeelEstimator& estimator,
                      const std::vector<Mode>& modes) {
    const std::vector<Vec2> recorded(pipeline.nominal.begin() + 1, pipeline.nominal.end());
    const GainSchedule schedule = GainSchedule::toward_center_then_up(
        config.controller.kappa, recorded, Vec2(config.world.center_x, config.world.center_y),
        config.controller.half_split);

    const bool want_open = std::find(modes.begin(), modes.end(), Mode::OpenLoop) != modes.end();
    const bool want_closed = std::find(modes.begin(), modes.end(), Mode::ClosedLoop) != modes.end();

    CompareResult out;
    const std::size_t n = config.n_compare;
    if (want_open) {
        out.open.resize(n);
    }
    if (want_closed) {
        out.closed.resize(n);
    }
    out.world_hashes.resize(n);
    parallel_for(n, [&](std::size_t i) {
        const int id = kCompareTrialIdBase + static_cast<int>(i);
        const MediumWorld open_world = world_for_trial(config, id);
        const MediumWorld closed_world = world_for_trial(config, id);
        if (world_hash(open_world) != world_hash(closed_world)) {
            throw std::logic_error("paired worlds differ for trial " + std::to_string(id));
        }
        out.world_hashes[i] = world_hash(open_world);
        if (want_open) {
            out.open[i] = run_paired_trial(config, pipeline, open_world, id, Mode::OpenLoop, &estimator, nullptr);
        }
        if (want_closed) {
            out.closed[i] = run_paired_trial(config, pipeline, closed_world, id, Mode::ClosedLoop, &estimator, &schedule);
        }
    });
    if (want_open) {
        out.summary.modes.push_back(summarize(Mode::OpenLoop, out.open));
    }
    if (want_closed) {
        out.summary.modes.push_back(summarize(Mode::ClosedLoop, out.closed));
    }
    return out;
}

std::vector<StatsRow> stats(const std::vector<TorqueTrace>& traces, std::size_t joints, std::size_t snapshots) {
    std::vector<StatsRow> rows;
    for (std::size_t j = 0; j < joints; ++j) {
        for (std::size_t t = 0; t < snapshots; ++t) {
            for (Medium label : {Medium::Pulp, Medium::Peel}) {
                std::vector<double> values;
                for (const auto& tr : traces) {
                    if (tr.label == label && t < tr.samples.size()) {
                        values.push_back(tr.samples[t].features.at(j));
                    }
                }
                StatsRow row;
                row.joint = j + 1;
                row.time_index = t + 1;
                row.label = label;
                row.count = values.size();
                if (!values.empty()) {
                    double sum = 0.0;
                    for (double v : values) {
                        sum += v;
                    }
                    row.mean = sum / static_cast<double>(values.size());
                    if (values.size() > 1) {
                        double ss = 0.0;
                        for (double v : values) {
                            ss += (v - row.mean) * (v - row.mean);
                        }
                        row.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
                    }
                } else {
                    row.mean = std::nan("");
                    row.stddev = std::nan("");
                }
                rows.push_back(row);
            }
        }
    }
    return rows;
}

std::vector<ReplayResult> replay(const ExperimentConfig& config, const std::vector<TrialRecord>& records) {
    std::vector<ReplayResult> out;
    for (const auto& r : records) {
        const MediumWorld world = world_for_trial(config, r.trial_id);
        out.push_back({r.trial_id, r.mode, r.outcome, judge_outcome(r, world, config.controller.criteria)});
    }
    return out;
}

void write_trial_csv(std::ostream& out, const std::vector<TrialRecord>& records, std::size_t joints) {
    out << "trial_id,mode,step,time_index";
    for (std::size_t j = 1; j <= joints; ++j) {
        out << ",tau_" << j;
    }
    out << ",x_tip,y_tip,x_nominal,y_nominal,pr_peel,d_signed,outcome\n";
    for (const auto& r : records) {
        for (std::size_t s = 0; s < r.steps(); ++s) {
            out << r.trial_id << ',' << to_string(r.mode) << ',' << s << ',' << fmt9(r.time_index[s]);
            for (std::size_t j = 0; j < joints; ++j) {
                out << ',' << fmt9(r.torques[s][static_cast<Eigen::Index>(j)]);
            }
            out << ',' << fmt9(r.tip_path[s].x()) << ',' << fmt9(r.tip_path[s].y()) << ','
                << fmt9(r.nominal_path[s].x()) << ',' << fmt9(r.nominal_path[s].y()) << ','
                << fmt9(r.pr_trace[s]) << ',' << fmt9(r.signed_distance[s]) << ',' << to_string(r.outcome)
                << '\n';
        }
    }
}

std::vector<TrialRecord> read_trial_csv(std::istream& in, std::size_t expected_steps) {
    std::string line;
    if (!std::getline(in, line)) {
        throw InvalidArgument("trial CSV is empty");
    }
    const auto header = split_csv_line(line);
    std::size_t joints = 0;
    while (4 + joints < header.size() && header[4 + joints] == "tau_" + std::to_string(joints + 1)) {
        ++joints;
    }
    const std::vector<std::string> tail{"x_tip", "y_tip", "x_nominal", "y_nominal", "pr_peel", "d_signed", "outcome"};
    if (header.size() != 4 + joints + tail.size() || header[0] != "trial_id" || header[1] != "mode"
        || header[2] != "step" || header[3] != "time_index"
        || !std::equal(tail.begin(), tail.end(), header.begin() + static_cast<std::ptrdiff_t>(4 + joints))) {
        throw InvalidArgument("unexpected trial CSV header: " + line);
    }

    std::vector<TrialRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw InvalidArgument("trial CSV line " + std::to_string(line_no) + " has "
                                  + std::to_string(cells.size()) + " cells, expected "
                                  + std::to_string(header.size()));
        }
        const int id = parse_int(cells[0]);
        const Mode mode = parse_mode(cells[1]);
        if (records.empty() || records.back().trial_id != id || records.back().mode != mode) {
            TrialRecord r;
            r.trial_id = id;
            r.mode = mode;
            records.push_back(std::move(r));
        }
        TrialRecord& r = records.back();
        if (static_cast<std::size_t>(parse_int(cells[2])) != r.steps()) {
            throw InvalidArgument("trial CSV line " + std::to_string(line_no) + " breaks the step sequence");
        }
        r.time_index.push_back(parse_double(cells[3]));
        Eigen::VectorXd tau(static_cast<Eigen::Index>(joints));
        for (std::size_t j = 0; j < joints; ++j) {
            tau[static_cast<Eigen::Index>(j)] = parse_double(cells[4 + j]);
        }
        r.torques.push_back(tau);
        const std::size_t o = 4 + joints;
        r.tip_path.emplace_back(parse_double(cells[o]), parse_double(cells[o + 1]));
        r.nominal_path.emplace_back(parse_double(cells[o + 2]), parse_double(cells[o + 3]));
        r.corrected_path.push_back(r.tip_path.back());
        r.pr_trace.push_back(parse_double(cells[o + 4]));
        r.signed_distance.push_back(parse_double(cells[o + 5]));
        r.outcome = parse_outcome(cells[o + 6]);
    }
    if (expected_steps > 0) {
        for (auto& r : records) {
            r.truncated = r.steps() < expected_steps;
        }
    }
    return records;
}

void write_demo_csv(std::ostream& out, const Trajectory& demo) {
    const std::size_t dims = demo.dims();
    out << "t";
    for (const char* prefix : {"y", "dy", "ddy"}) {
        for (std::size_t d = 1; d <= dims; ++d) {
            out << ',' << prefix << '_' << d;
        }
    }
    out << '\n';
    char buf[64];
    for (std::size_t i = 0; i < demo.points.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", demo.dt * static_cast<double>(i));
        out << buf;
        const auto& p = demo.points[i];
        for (const auto* v : {&p.y, &p.dy, &p.ddy}) {
            for (double x : *v) {
                std::snprintf(buf, sizeof buf, "%.17g", x);
                out << ',' << buf;
            }
        }
        out << '\n';
    }
}

Trajectory read_demo_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw InvalidArgument("demo CSV is empty");
    }
    const auto header = split_csv_line(line);
    if (header.empty() || header[0] != "t" || (header.size() - 1) % 3 != 0) {
        throw InvalidArgument("unexpected demo CSV header: " + line);
    }
    const std::size_t dims = (header.size() - 1) / 3;
    Trajectory traj;
    std::vector<double> times;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw InvalidArgument("demo CSV row has the wrong number of cells");
        }
        times.push_back(parse_double(cells[0]));
        TrajectoryPoint p;
        for (std::size_t d = 0; d < dims; ++d) {
            p.y.push_back(parse_double(cells[1 + d]));
            p.dy.push_back(parse_double(cells[1 + dims + d]));
            p.ddy.push_back(parse_double(cells[1 + 2 * dims + d]));
        }
        traj.points.push_back(std::move(p));
    }
    if (times.size() < 2) {
        throw InvalidArgument("demo CSV needs at least two rows");
    }
    traj.dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
    return traj;
}

void write_stats_csv(std::ostream& out, const std::vector<StatsRow>& rows) {
    out << "joint,time_index,label,count,mean,std\n";
    for (const auto& r : rows) {
        out << r.joint << ',' << r.time_index << ',' << to_string(r.label) << ',' << r.count << ','
            << fmt9(r.mean) << ',' << fmt9(r.stddev) << '\n';
    }
}

void write_summary_csv(std::ostream& out, const RunSummary& summary) {
    out << "mode,trials,successful,failed,stuck_in_peel,incomplete_extraction,success_rate\n";
    for (const auto& m : summary.modes) {
        out << to_string(m.mode) << ',' << m.trials << ',' << m.successful << ',' << m.failed << ',' << m.stuck
            << ',' << m.incomplete << ',' << fmt9(m.success_rate) << '\n';
    }
}

nlohmann::ordered_json to_json(const RunSummary& summary) {
    nlohmann::ordered_json doc;
    auto modes = nlohmann::ordered_json::array();
    for (const auto& m : summary.modes) {
        nlohmann::ordered_json e;
        e["mode"] = to_string(m.mode);
        e["trials"] = m.trials;
        e["successful"] = m.successful;
        e["failed"] = m.failed;
        e["stuck_in_peel"] = m.stuck;
        e["incomplete_extraction"] = m.incomplete;
        e["success_rate"] = m.success_rate;
        modes.push_back(std::move(e));
    }
    doc["modes"] = std::move(modes);
    if (summary.classifier) {
        doc["classifier_test"] = to_json(*summary.classifier);
    }
    doc["artifacts"] = summary.artifacts;
    return doc;
}

} // namespace bcut
