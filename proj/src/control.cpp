#include "bcut/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bcut/errors.hpp"

namespace bcut {

const char* to_string(Mode m) noexcept {
    return m == Mode::ClosedLoop ? "closed" : "open";
}

const char* to_string(Outcome o) noexcept {
    switch (o) {
    case Outcome::Success:
        return "Success";
    case Outcome::StuckInPeel:
        return "StuckInPeel";
    case Outcome::IncompleteExtraction:
        return "IncompleteExtraction";
    }
    return "Success";
}

Mode parse_mode(const std::string& s) {
    if (s == "open") {
        return Mode::OpenLoop;
    }
    if (s == "closed") {
        return Mode::ClosedLoop;
    }
    throw InvalidArgument("unknown mode '" + s + "' (expected open or closed)");
}

Outcome parse_outcome(const std::string& s) {
    if (s == "Success") {
        return Outcome::Success;
    }
    if (s == "StuckInPeel") {
        return Outcome::StuckInPeel;
    }
    if (s == "IncompleteExtraction") {
        return Outcome::IncompleteExtraction;
    }
    throw InvalidArgument("unknown outcome '" + s + "'");
}

GainSchedule GainSchedule::toward_center_then_up(double kappa, const std::vector<Vec2>& nominal,
                                                 const Vec2& center, std::size_t half_split) {
    if (kappa < 0.0) {
        throw InvalidArgument("kappa must be non-negative");
    }
    GainSchedule g;
    g.kappa = kappa;
    g.half_split = half_split;
    for (std::size_t t = 0; t < nominal.size(); ++t) {
        Vec2 u = Vec2::UnitY();
        if (t < half_split) {
            const Vec2 to_center = center - nominal[t];
            if (to_center.norm() > 0.0) {
                u = to_center.normalized();
            }
        }
        g.directions.push_back(u);
    }
    return g;
}

Vec2 correction(double pr_peel, std::size_t step, const GainSchedule& schedule) {
    if (step >= schedule.directions.size()) {
        throw InvalidArgument("step " + std::to_string(step) + " is outside the gain schedule");
    }
    return schedule.kappa * (pr_peel - 0.5) * schedule.directions[step];
}

PeelEstimator model_estimator(LogisticModel model) {
    return [m = std::move(model)](const Observation& obs) {
        std::vector<double> features(obs.torques.data(), obs.torques.data() + obs.torques.size());
        features.push_back(obs.time_index);
        return predict_proba(m, features);
    };
}

PeelEstimator constant_estimator(double pr) {
    return [pr](const Observation&) { return pr; };
}

PeelEstimator oracle_estimator() {
    return [](const Observation& obs) { return obs.signed_distance >= 0.0 ? 1.0 : 0.0; };
}

Outcome judge_outcome(const TrialRecord& record, const MediumWorld& world, const OutcomeCriteria& criteria) {
    if (record.truncated) {
        return Outcome::StuckInPeel;
    }
    if (record.tip_path.empty()) {
        return Outcome::IncompleteExtraction;
    }
    double max_d = -std::numeric_limits<double>::infinity();
    std::size_t in_band = 0;
    for (const auto& p : record.tip_path) {
        const double d = medium_at(world, p).signed_distance;
        max_d = std::max(max_d, d);
        if (d >= -criteria.d_margin && d < criteria.d_stuck) {
            ++in_band;
        }
    }
    if (max_d > criteria.d_stuck) {
        return Outcome::StuckInPeel;
    }
    const double coverage = static_cast<double>(in_band) / static_cast<double>(record.tip_path.size());
    const Vec2 goal = record.nominal_path.empty() ? record.tip_path.back() : record.nominal_path.back();
    if (coverage < criteria.coverage_min
        || (record.tip_path.back() - goal).norm() > criteria.goal_tol) {
        return Outcome::IncompleteExtraction;
    }
    return Outcome::Success;
}

std::vector<Vec2> sample_nominal(const Dmp& dmp, const TrialOptions& options) {
    if (dmp.dims() != 2) {
        throw InvalidArgument("the cutting task needs a two-dimensional movement primitive");
    }
    if (options.snapshots == 0 || options.substeps == 0) {
        throw InvalidArgument("snapshots and substeps must be positive");
    }
    const double dt = dmp.tau() / static_cast<double>(options.snapshots * options.substeps);
    const auto traj = rollout(dmp, dt, options.snapshots * options.substeps);
    std::vector<Vec2> out;
    for (std::size_t k = 0; k <= options.snapshots; ++k) {
        const auto& y = traj.points[k * options.substeps].y;
        out.emplace_back(y[0], y[1]);
    }
    return out;
}

TrialRecord run_trial(const TrialInputs& in) {
    if (in.nominal == nullptr || in.world == nullptr || in.nominal->size() < 2) {
        throw InvalidArgument("trial needs a nominal path and a world");
    }
    if (in.mode == Mode::ClosedLoop && (in.estimator == nullptr || in.schedule == nullptr)) {
        throw InvalidArgument("closed-loop trials need an estimator and a gain schedule");
    }
    const auto& nominal = *in.nominal;
    const std::size_t steps = nominal.size() - 1;
    if (in.mode == Mode::ClosedLoop && in.schedule->directions.size() < steps) {
        throw InvalidArgument("gain schedule is shorter than the trial");
    }

    TrialRecord rec;
    rec.trial_id = in.trial_id;
    rec.seed = in.seed;
    rec.mode = in.mode;
    Rng rng(in.seed);

    PlanarArm arm = in.arm;
    arm.joint_angles = ik(arm, nominal.front()).angles;

    double pr_prev = 0.5;
    for (std::size_t s = 0; s < steps; ++s) {
        const Vec2& y = nominal[s + 1];
        Vec2 commanded = y;
        if (in.mode == Mode::ClosedLoop) {
            commanded = y + correction(pr_prev, s, *in.schedule);
        }

        WorldStep ws;
        try {
            ws = step_world(*in.world, arm, commanded, in.step_dt, rng);
        } catch (const std::runtime_error& e) {
            const double d_now = medium_at(*in.world, fk(arm).tip).signed_distance;
            if (d_now >= 0.0) {
                rec.truncated = true;
                rec.outcome = Outcome::StuckInPeel;
                return rec;
            }
            throw TrialAborted("trial " + std::to_string(in.trial_id) + " aborted at step "
                               + std::to_string(s) + ": " + e.what());
        }
        arm = ws.arm;

        Observation obs;
        obs.torques = ws.torques;
        obs.time_index = static_cast<double>(s + 1);
        obs.tip = fk(arm).tip;
        obs.signed_distance = ws.contact.signed_distance;
        const double pr = in.estimator != nullptr ? (*in.estimator)(obs) : 0.5;

        rec.nominal_path.push_back(y);
        rec.corrected_path.push_back(commanded);
        rec.tip_path.push_back(obs.tip);
        rec.torques.push_back(ws.torques);
        rec.time_index.push_back(obs.time_index);
        rec.pr_trace.push_back(pr);
        rec.signed_distance.push_back(ws.contact.signed_distance);
        pr_prev = pr;
    }
    rec.outcome = judge_outcome(rec, *in.world, in.criteria);
    return rec;
}

TrialRecord run_trial(const Dmp& dmp, const MediumWorld& world, const PlanarArm& arm,
                      const PeelEstimator* estimator, const GainSchedule* schedule, Mode mode,
                      const TrialOptions& options, const OutcomeCriteria& criteria, int trial_id,
                      std::uint64_t seed) {
    const auto nominal = sample_nominal(dmp, options);
    TrialInputs in;
    in.nominal = &nominal;
    in.step_dt = dmp.tau() / static_cast<double>(options.snapshots);
    in.world = &world;
    in.arm = arm;
    in.estimator = estimator;
    in.schedule = schedule;
    in.mode = mode;
    in.criteria = criteria;
    in.trial_id = trial_id;
    in.seed = seed;
    return run_trial(in);
}

} // namespace bcut
