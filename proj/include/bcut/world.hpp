#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace bcut {

using Vec2 = Eigen::Vector2d;
using Rng = std::mt19937_64;

enum class Medium { Pulp, Peel };

const char* to_string(Medium m) noexcept;

struct Harmonic {
    int order = 1;
    double amplitude = 0.0;  // m
    double phase = 0.0;      // rad

    bool operator==(const Harmonic&) const = default;
};

// Two-medium cross-section: pulp inside the closed curve
// r(phi) = base_radius + sum_k a_k cos(k phi + p_k) around `center`,
// peel outside it.
struct MediumWorld {
    Vec2 center = Vec2::Zero();
    double base_radius = 0.04;
    std::vector<Harmonic> harmonics;
    double mu_pulp = 5.0;         // N s/m
    double mu_peel = 15.0;        // N s/m
    double peel_penalty = 200.0;  // N/m
    double noise_sigma = 0.0;     // N m
    std::uint64_t seed = 0;

    double radius(double phi) const;
    double radius_derivative(double phi) const;

    // Throws InvalidArgument when mu_peel <= mu_pulp <= 0 or r(phi) is not
    // strictly positive on a dense angular grid.
    void validate() const;

    bool operator==(const MediumWorld&) const = default;
};

struct MediumSample {
    Medium medium = Medium::Pulp;
    double signed_distance = 0.0;  // m, negative inside the pulp
};

struct ContactResult {
    Medium medium = Medium::Pulp;
    double signed_distance = 0.0;
    Vec2 force = Vec2::Zero();
    Vec2 tip_velocity = Vec2::Zero();
};

// Radial signed distance d(p) = |p - c| - r(atan2(p - c)); at p = c the angle is taken as 0.
MediumSample medium_at(const MediumWorld& world, const Vec2& p);

// Unit outward normal of the level set of d at p.
Vec2 boundary_normal(const MediumWorld& world, const Vec2& p);

// Viscous resistance of the local medium plus a penalty push-back inside the peel.
Vec2 contact_force(const MediumWorld& world, const Vec2& tip, const Vec2& velocity);

std::uint64_t world_hash(const MediumWorld& world);

nlohmann::ordered_json to_json(const MediumWorld& world);
MediumWorld world_from_json(const nlohmann::ordered_json& doc);

struct PlanarArm {
    Eigen::VectorXd link_lengths;
    Eigen::VectorXd joint_angles;
    Vec2 base = Vec2::Zero();

    Eigen::Index joints() const noexcept { return link_lengths.size(); }
    double reach() const { return link_lengths.sum(); }
};

struct ArmPose {
    Vec2 tip;
    std::vector<Vec2> joint_positions;  // joint 0 (the base) .. joint J-1
};

ArmPose fk(const PlanarArm& arm);
Eigen::Matrix<double, 2, Eigen::Dynamic> jacobian(const PlanarArm& arm);

struct IkOptions {
    double tolerance = 1e-6;
    int max_iterations = 200;
    double initial_damping = 1e-3;
};

struct IkSolution {
    Eigen::VectorXd angles;
    int iterations = 0;
    double residual = 0.0;
};

// Damped least squares from the arm's current posture. Throws OutOfWorkspace
// for targets beyond the reach and ConvergenceError when the iteration cap is hit.
IkSolution ik(const PlanarArm& arm, const Vec2& target, const IkOptions& options = {});

// tau = J^T F plus zero-mean Gaussian noise of the given standard deviation.
Eigen::VectorXd sense_torques(const PlanarArm& arm, const Vec2& force, double noise_sigma, Rng& rng);

struct WorldStep {
    PlanarArm arm;
    ContactResult contact;
    Eigen::VectorXd torques;
};

WorldStep step_world(const MediumWorld& world, const PlanarArm& arm, const Vec2& commanded_tip,
                     double dt, Rng& rng, const IkOptions& options = {});

} // namespace bcut
