#include "bcut/dmp.hpp"

#include <cmath>
#include <limits>

#include "bcut/errors.hpp"

namespace bcut {

namespace {

constexpr double kRidge = 1e-10;

void require_positive_dt(double dt) {
    if (!(dt > 0.0)) {
        throw InvalidArgument("time step must be positive, got " + std::to_string(dt));
    }
}

double normalized_weighted_sum(const BasisSet& basis, const std::vector<double>& weights, double x) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < basis.size(); ++i) {
        const double diff = x - basis.centers[i];
        const double psi = std::exp(-basis.widths[i] * diff * diff);
        num += psi * weights[i];
        den += psi;
    }
    return den > 0.0 ? num / den : 0.0;
}

} // namespace

CanonicalSystem canonical_step(const CanonicalSystem& cs, double dt) {
    require_positive_dt(dt);
    CanonicalSystem next = cs;
    next.x = cs.x + dt * (-cs.alpha_x * cs.x / cs.tau);
    if (next.x <= 0.0) {
        next.x = std::numeric_limits<double>::min();
    }
    return next;
}

BasisSet BasisSet::spaced_in_time(std::size_t count, double alpha_x) {
    if (count == 0) {
        throw InvalidArgument("basis set needs at least one function");
    }
    BasisSet basis;
    basis.centers.resize(count);
    basis.widths.resize(count);
    if (count == 1) {
        basis.centers[0] = 1.0;
        basis.widths[0] = 1.0;
        return basis;
    }
    for (std::size_t i = 0; i < count; ++i) {
        basis.centers[i] = std::exp(-alpha_x * static_cast<double>(i) / static_cast<double>(count - 1));
    }
    for (std::size_t i = 0; i + 1 < count; ++i) {
        const double gap = basis.centers[i + 1] - basis.centers[i];
        basis.widths[i] = 1.0 / (gap * gap);
    }
    basis.widths[count - 1] = basis.widths[count - 2];
    return basis;
}

std::vector<double> basis_activations(const BasisSet& basis, double x) {
    std::vector<double> psi(basis.size());
    for (std::size_t i = 0; i < basis.size(); ++i) {
        const double diff = x - basis.centers[i];
        psi[i] = std::exp(-basis.widths[i] * diff * diff);
    }
    return psi;
}

Dmp Dmp::create(CanonicalSystem canonical, BasisSet basis, std::vector<TransformationSystem> systems) {
    if (!(canonical.alpha_x > 0.0) || !(canonical.tau > 0.0)) {
        throw InvalidArgument("canonical system needs alpha_x > 0 and tau > 0");
    }
    if (basis.size() == 0 || basis.widths.size() != basis.size()) {
        throw InvalidArgument("basis set is empty or has mismatched widths");
    }
    for (std::size_t i = 0; i < basis.size(); ++i) {
        if (!(basis.widths[i] > 0.0)) {
            throw InvalidArgument("basis widths must be positive");
        }
        if (i > 0 && !(basis.centers[i] < basis.centers[i - 1])) {
            throw InvalidArgument("basis centers must be strictly decreasing");
        }
    }
    if (systems.empty()) {
        throw InvalidArgument("a movement primitive needs at least one dimension");
    }

    Dmp dmp;
    for (std::size_t d = 0; d < systems.size(); ++d) {
        if (systems[d].weights.size() != basis.size()) {
            throw InvalidArgument("dimension " + std::to_string(d) + " has "
                                  + std::to_string(systems[d].weights.size()) + " weights, expected "
                                  + std::to_string(basis.size()));
        }
        if (systems[d].goal == systems[d].start) {
            dmp.warnings_.push_back("dimension " + std::to_string(d)
                                    + ": goal equals start, forcing term disabled");
        }
    }
    dmp.canonical_ = canonical;
    dmp.canonical_.x = 1.0;
    dmp.basis_ = std::move(basis);
    dmp.systems_ = std::move(systems);
    return dmp;
}

Dmp Dmp::with_goal(std::size_t dim, double goal) const {
    auto systems = systems_;
    systems.at(dim).goal = goal;
    return create(canonical_, basis_, std::move(systems));
}

Dmp Dmp::with_tau(double tau) const {
    CanonicalSystem cs = canonical_;
    cs.tau = tau;
    return create(cs, basis_, systems_);
}

Trajectory trajectory_from_positions(double dt, const std::vector<std::vector<double>>& positions) {
    require_positive_dt(dt);
    Trajectory traj;
    traj.dt = dt;
    const std::size_t n = positions.size();
    if (n == 0) {
        return traj;
    }
    const std::size_t dims = positions.front().size();
    traj.points.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        if (positions[t].size() != dims) {
            throw InvalidArgument("positions have inconsistent dimension");
        }
        traj.points[t].y = positions[t];
        traj.points[t].dy.assign(dims, 0.0);
        traj.points[t].ddy.assign(dims, 0.0);
    }
    if (n < 2) {
        return traj;
    }
    auto diff = [&](auto get, auto set) {
        for (std::size_t t = 0; t < n; ++t) {
            for (std::size_t d = 0; d < dims; ++d) {
                double v;
                if (t == 0) {
                    v = (get(1, d) - get(0, d)) / dt;
                } else if (t == n - 1) {
                    v = (get(n - 1, d) - get(n - 2, d)) / dt;
                } else {
                    v = (get(t + 1, d) - get(t - 1, d)) / (2.0 * dt);
                }
                set(t, d, v);
            }
        }
    };
    diff([&](std::size_t t, std::size_t d) { return traj.points[t].y[d]; },
         [&](std::size_t t, std::size_t d, double v) { traj.points[t].dy[d] = v; });
    diff([&](std::size_t t, std::size_t d) { return traj.points[t].dy[d]; },
         [&](std::size_t t, std::size_t d, double v) { traj.points[t].ddy[d] = v; });
    return traj;
}

double forcing_term(const Dmp& dmp, double x, std::size_t dim) {
    const auto& sys = dmp.systems().at(dim);
    const double scale = sys.goal - sys.start;
    if (scale == 0.0) {
        return 0.0;
    }
    return normalized_weighted_sum(dmp.basis(), sys.weights, x) * x * scale;
}

Dmp fit_dmp(const Trajectory& demo, const DmpConfig& config) {
    if (config.basis_count == 0) {
        throw InvalidArgument("basis_count must be at least 1");
    }
    if (demo.points.size() < 2 * config.basis_count) {
        throw InvalidArgument("demonstration has " + std::to_string(demo.points.size())
                              + " points; at least " + std::to_string(2 * config.basis_count)
                              + " are required");
    }
    if (!(demo.dt > 0.0) || !(demo.duration() > 0.0)) {
        throw InvalidArgument("demonstration duration must be positive");
    }

    CanonicalSystem cs;
    cs.alpha_x = config.alpha_x;
    cs.tau = config.tau > 0.0 ? config.tau : demo.duration();
    BasisSet basis = BasisSet::spaced_in_time(config.basis_count, config.alpha_x);

    const std::size_t samples = demo.points.size();
    std::vector<double> phase(samples);
    CanonicalSystem running = cs;
    for (std::size_t t = 0; t < samples; ++t) {
        phase[t] = running.x;
        running = canonical_step(running, demo.dt);
    }
    std::vector<std::vector<double>> psi(samples);
    for (std::size_t t = 0; t < samples; ++t) {
        psi[t] = basis_activations(basis, phase[t]);
    }

    const double tau = cs.tau;
    const double alpha_z = config.alpha_z;
    const double beta_z = config.alpha_z / 4.0;
    std::vector<TransformationSystem> systems;
    for (std::size_t d = 0; d < demo.dims(); ++d) {
        TransformationSystem sys;
        sys.alpha_z = alpha_z;
        sys.beta_z = beta_z;
        sys.start = demo.points.front().y[d];
        sys.goal = demo.points.back().y[d];
        sys.weights.assign(basis.size(), 0.0);
        const double scale = sys.goal - sys.start;

        std::vector<double> num(basis.size(), 0.0);
        std::vector<double> den(basis.size(), 0.0);
        for (std::size_t t = 0; t < samples; ++t) {
            const auto& p = demo.points[t];
            const double target = tau * tau * p.ddy[d]
                                  - alpha_z * (beta_z * (sys.goal - p.y[d]) - tau * p.dy[d]);
            const double s = phase[t] * scale;
            for (std::size_t i = 0; i < basis.size(); ++i) {
                num[i] += psi[t][i] * s * target;
                den[i] += psi[t][i] * s * s;
            }
        }
        for (std::size_t i = 0; i < basis.size(); ++i) {
            sys.weights[i] = num[i] / (den[i] + kRidge);
        }
        systems.push_back(std::move(sys));
    }
    return Dmp::create(cs, std::move(basis), std::move(systems));
}

DmpState initial_state(const Dmp& dmp) {
    DmpState s;
    for (const auto& sys : dmp.systems()) {
        s.y.push_back(sys.start);
    }
    s.dy.assign(dmp.dims(), 0.0);
    s.x = 1.0;
    return s;
}

namespace {

std::vector<double> acceleration(const Dmp& dmp, const DmpState& state) {
    const double tau = dmp.tau();
    std::vector<double> ddy(dmp.dims());
    for (std::size_t d = 0; d < dmp.dims(); ++d) {
        const auto& sys = dmp.systems()[d];
        const double f = forcing_term(dmp, state.x, d);
        ddy[d] = (sys.alpha_z * (sys.beta_z * (sys.goal - state.y[d]) - tau * state.dy[d]) + f)
                 / (tau * tau);
    }
    return ddy;
}

} // namespace

DmpState step_dmp(const Dmp& dmp, const DmpState& state, double dt) {
    require_positive_dt(dt);
    const auto ddy = acceleration(dmp, state);
    DmpState next;
    next.y.resize(dmp.dims());
    next.dy.resize(dmp.dims());
    for (std::size_t d = 0; d < dmp.dims(); ++d) {
        next.y[d] = state.y[d] + dt * state.dy[d];
        next.dy[d] = state.dy[d] + dt * ddy[d];
    }
    CanonicalSystem cs = dmp.canonical();
    cs.x = state.x;
    next.x = canonical_step(cs, dt).x;
    return next;
}

Trajectory rollout(const Dmp& dmp, double dt, std::size_t horizon) {
    require_positive_dt(dt);
    Trajectory traj;
    traj.dt = dt;
    traj.points.reserve(horizon + 1);
    DmpState state = initial_state(dmp);
    for (std::size_t k = 0; k <= horizon; ++k) {
        traj.points.push_back({state.y, state.dy, acceleration(dmp, state)});
        if (k < horizon) {
            state = step_dmp(dmp, state, dt);
        }
    }
    return traj;
}

nlohmann::ordered_json to_json(const Dmp& dmp) {
    nlohmann::ordered_json doc;
    doc["alpha_x"] = dmp.canonical().alpha_x;
    doc["tau"] = dmp.tau();
    doc["alpha_z"] = dmp.systems().front().alpha_z;
    doc["beta_z"] = dmp.systems().front().beta_z;
    doc["N"] = dmp.basis().size();
    doc["centers"] = dmp.basis().centers;
    doc["widths"] = dmp.basis().widths;
    doc["dims"] = dmp.dims();
    auto systems = nlohmann::ordered_json::array();
    for (const auto& sys : dmp.systems()) {
        nlohmann::ordered_json s;
        s["g"] = sys.goal;
        s["y0"] = sys.start;
        s["weights"] = sys.weights;
        systems.push_back(std::move(s));
    }
    doc["systems"] = std::move(systems);
    return doc;
}

Dmp dmp_from_json(const nlohmann::ordered_json& doc) {
    try {
        CanonicalSystem cs;
        cs.alpha_x = doc.at("alpha_x").get<double>();
        cs.tau = doc.at("tau").get<double>();
        BasisSet basis;
        basis.centers = doc.at("centers").get<std::vector<double>>();
        basis.widths = doc.at("widths").get<std::vector<double>>();
        if (doc.at("N").get<std::size_t>() != basis.size()) {
            throw InvalidArgument("N does not match the number of centers");
        }
        const double alpha_z = doc.at("alpha_z").get<double>();
        const double beta_z = doc.at("beta_z").get<double>();
        std::vector<TransformationSystem> systems;
        for (const auto& s : doc.at("systems")) {
            TransformationSystem sys;
            sys.alpha_z = alpha_z;
            sys.beta_z = beta_z;
            sys.goal = s.at("g").get<double>();
            sys.start = s.at("y0").get<double>();
            sys.weights = s.at("weights").get<std::vector<double>>();
            systems.push_back(std::move(sys));
        }
        if (doc.at("dims").get<std::size_t>() != systems.size()) {
            throw InvalidArgument("dims does not match the number of systems");
        }
        return Dmp::create(cs, std::move(basis), std::move(systems));
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed movement primitive document: ") + e.what());
    }
}

} // namespace bcut
