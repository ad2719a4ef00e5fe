#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

namespace bcut {

// Phase dynamics tau * dx/dt = -alpha_x * x, starting at x = 1.
struct CanonicalSystem {
    double alpha_x = 4.6;
    double tau = 1.0;
    double x = 1.0;
};

// One explicit Euler step of the phase. The result is clamped to stay positive.
CanonicalSystem canonical_step(const CanonicalSystem& cs, double dt);

// Gaussian kernels in phase space, exp(-h_i (x - c_i)^2).
struct BasisSet {
    std::vector<double> centers;
    std::vector<double> widths;

    std::size_t size() const noexcept { return centers.size(); }

    // Centers equally spaced in time (exponential in phase); h_i = 1 / (c_{i+1} - c_i)^2.
    static BasisSet spaced_in_time(std::size_t count, double alpha_x);
};

std::vector<double> basis_activations(const BasisSet& basis, double x);

struct TransformationSystem {
    double alpha_z = 25.0;
    double beta_z = 25.0 / 4.0;
    double goal = 0.0;
    double start = 0.0;
    std::vector<double> weights;
};

struct DmpConfig {
    std::size_t basis_count = 50;
    double alpha_x = 4.6;
    double alpha_z = 25.0;
    // Non-positive means "use the demonstration's duration".
    double tau = 0.0;

    bool operator==(const DmpConfig&) const = default;
};

// A multi-dimensional movement primitive: one transformation system per
// task-space dimension, all driven by a shared phase and basis.
// Construct through Dmp::create, which validates the invariants and records
// a warning for every dimension whose goal equals its start (the forcing
// term is forced to zero there).
class Dmp {
public:
    static Dmp create(CanonicalSystem canonical, BasisSet basis,
                      std::vector<TransformationSystem> systems);

    const CanonicalSystem& canonical() const noexcept { return canonical_; }
    const BasisSet& basis() const noexcept { return basis_; }
    const std::vector<TransformationSystem>& systems() const noexcept { return systems_; }
    std::size_t dims() const noexcept { return systems_.size(); }
    double tau() const noexcept { return canonical_.tau; }
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

    Dmp with_goal(std::size_t dim, double goal) const;
    Dmp with_tau(double tau) const;

private:
    Dmp() = default;

    CanonicalSystem canonical_;
    BasisSet basis_;
    std::vector<TransformationSystem> systems_;
    std::vector<std::string> warnings_;
};

struct TrajectoryPoint {
    std::vector<double> y;
    std::vector<double> dy;
    std::vector<double> ddy;
};

struct Trajectory {
    double dt = 0.0;
    std::vector<TrajectoryPoint> points;

    std::size_t dims() const noexcept { return points.empty() ? 0 : points.front().y.size(); }
    double duration() const noexcept {
        return points.size() < 2 ? 0.0 : dt * static_cast<double>(points.size() - 1);
    }
};

// Builds a trajectory from sampled positions; velocity and acceleration come
// from central differences (one-sided at the ends).
Trajectory trajectory_from_positions(double dt, const std::vector<std::vector<double>>& positions);

double forcing_term(const Dmp& dmp, double x, std::size_t dim);

// Locally weighted regression of the forcing-term weights, one scalar
// weighted least-squares problem per basis function.
Dmp fit_dmp(const Trajectory& demo, const DmpConfig& config);

struct DmpState {
    std::vector<double> y;
    std::vector<double> dy;
    double x = 1.0;
};

DmpState initial_state(const Dmp& dmp);
DmpState step_dmp(const Dmp& dmp, const DmpState& state, double dt);

// Integrates `horizon` Euler steps from (start, dy = 0); returns horizon + 1 points.
Trajectory rollout(const Dmp& dmp, double dt, std::size_t horizon);

nlohmann::ordered_json to_json(const Dmp& dmp);
Dmp dmp_from_json(const nlohmann::ordered_json& doc);

} // namespace bcut
