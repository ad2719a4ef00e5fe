#include "bcut/world.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <string>

#include "bcut/errors.hpp"

namespace bcut {

const char* to_string(Medium m) noexcept {
    return m == Medium::Peel ? "Peel" : "Pulp";
}

double MediumWorld::radius(double phi) const {
    double r = base_radius;
    for (const auto& h : harmonics) {
        r += h.amplitude * std::cos(h.order * phi + h.phase);
    }
    return r;
}

double MediumWorld::radius_derivative(double phi) const {
    double dr = 0.0;
    for (const auto& h : harmonics) {
        dr -= h.amplitude * h.order * std::sin(h.order * phi + h.phase);
    }
    return dr;
}

void MediumWorld::validate() const {
    if (!(mu_pulp > 0.0) || !(mu_peel > mu_pulp)) {
        throw InvalidArgument("world requires mu_peel > mu_pulp > 0");
    }
    if (peel_penalty < 0.0 || noise_sigma < 0.0) {
        throw InvalidArgument("peel_penalty and noise_sigma must be non-negative");
    }
    // A polar curve with r > 0 everywhere is star-shaped about the center, hence simple.
    constexpr int kGrid = 4096;
    for (int i = 0; i < kGrid; ++i) {
        const double phi = 2.0 * std::numbers::pi * i / kGrid;
        if (!(radius(phi) > 0.0)) {
            throw InvalidArgument("boundary radius must stay positive");
        }
    }
}

MediumSample medium_at(const MediumWorld& world, const Vec2& p) {
    const Vec2 rel = p - world.center;
    const double rho = rel.norm();
    const double phi = rho > 0.0 ? std::atan2(rel.y(), rel.x()) : 0.0;
    MediumSample s;
    s.signed_distance = rho - world.radius(phi);
    s.medium = s.signed_distance < 0.0 ? Medium::Pulp : Medium::Peel;
    return s;
}

Vec2 boundary_normal(const MediumWorld& world, const Vec2& p) {
    const Vec2 rel = p - world.center;
    const double rho = rel.norm();
    if (rho == 0.0) {
        return Vec2::UnitX();
    }
    const double phi = std::atan2(rel.y(), rel.x());
    const Vec2 radial = rel / rho;
    const Vec2 tangential(-radial.y(), radial.x());
    const Vec2 grad = radial - (world.radius_derivative(phi) / rho) * tangential;
    return grad.normalized();
}

Vec2 contact_force(const MediumWorld& world, const Vec2& tip, const Vec2& velocity) {
    const MediumSample s = medium_at(world, tip);
    const double mu = s.medium == Medium::Peel ? world.mu_peel : world.mu_pulp;
    Vec2 force = -mu * velocity;
    if (s.signed_distance >= 0.0) {
        force -= world.peel_penalty * s.signed_distance * boundary_normal(world, tip);
    }
    return force;
}

namespace {

class Fnv1a {
public:
    template <typename T>
    void add(const T& value) {
        unsigned char bytes[sizeof(T)];
        std::memcpy(bytes, &value, sizeof(T));
        for (unsigned char b : bytes) {
            hash_ ^= b;
            hash_ *= 0x100000001b3ULL;
        }
    }
    std::uint64_t value() const noexcept { return hash_; }

private:
    std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

} // namespace

std::uint64_t world_hash(const MediumWorld& world) {
    Fnv1a h;
    h.add(world.center.x());
    h.add(world.center.y());
    h.add(world.base_radius);
    for (const auto& harmonic : world.harmonics) {
        h.add(harmonic.order);
        h.add(harmonic.amplitude);
        h.add(harmonic.phase);
    }
    h.add(world.mu_pulp);
    h.add(world.mu_peel);
    h.add(world.peel_penalty);
    h.add(world.noise_sigma);
    h.add(world.seed);
    return h.value();
}

nlohmann::ordered_json to_json(const MediumWorld& world) {
    nlohmann::ordered_json doc;
    doc["center"] = {world.center.x(), world.center.y()};
    doc["base_radius"] = world.base_radius;
    auto harmonics = nlohmann::ordered_json::array();
    for (const auto& h : world.harmonics) {
        harmonics.push_back({{"order", h.order}, {"amplitude", h.amplitude}, {"phase", h.phase}});
    }
    doc["harmonics"] = std::move(harmonics);
    doc["mu_pulp"] = world.mu_pulp;
    doc["mu_peel"] = world.mu_peel;
    doc["peel_penalty"] = world.peel_penalty;
    doc["noise_sigma"] = world.noise_sigma;
    doc["seed"] = world.seed;
    return doc;
}

MediumWorld world_from_json(const nlohmann::ordered_json& doc) {
    try {
        MediumWorld w;
        const auto c = doc.at("center").get<std::vector<double>>();
        if (c.size() != 2) {
            throw InvalidArgument("world center must have two coordinates");
        }
        w.center = Vec2(c[0], c[1]);
        w.base_radius = doc.at("base_radius").get<double>();
        for (const auto& h : doc.at("harmonics")) {
            w.harmonics.push_back({h.at("order").get<int>(), h.at("amplitude").get<double>(),
                                   h.at("phase").get<double>()});
        }
        w.mu_pulp = doc.at("mu_pulp").get<double>();
        w.mu_peel = doc.at("mu_peel").get<double>();
        w.peel_penalty = doc.at("peel_penalty").get<double>();
        w.noise_sigma = doc.at("noise_sigma").get<double>();
        w.seed = doc.at("seed").get<std::uint64_t>();
        w.validate();
        return w;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed world document: ") + e.what());
    }
}

ArmPose fk(const PlanarArm& arm) {
    ArmPose pose;
    Vec2 p = arm.base;
    double heading = 0.0;
    for (Eigen::Index j = 0; j < arm.joints(); ++j) {
        pose.joint_positions.push_back(p);
        heading += arm.joint_angles[j];
        p += arm.link_lengths[j] * Vec2(std::cos(heading), std::sin(heading));
    }
    pose.tip = p;
    return pose;
}

Eigen::Matrix<double, 2, Eigen::Dynamic> jacobian(const PlanarArm& arm) {
    const Eigen::Index n = arm.joints();
    Eigen::Matrix<double, 2, Eigen::Dynamic> jac(2, n);
    // Column j sums the tangential contributions of links j..n-1.
    Vec2 acc = Vec2::Zero();
    std::vector<Vec2> link(n);
    double heading = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        heading += arm.joint_angles[j];
        link[j] = arm.link_lengths[j] * Vec2(-std::sin(heading), std::cos(heading));
    }
    for (Eigen::Index j = n - 1; j >= 0; --j) {
        acc += link[j];
        jac.col(j) = acc;
    }
    return jac;
}

IkSolution ik(const PlanarArm& arm, const Vec2& target, const IkOptions& options) {
    const double distance = (target - arm.base).norm();
    if (distance > arm.reach()) {
        throw OutOfWorkspace("target at distance " + std::to_string(distance)
                             + " m exceeds arm reach " + std::to_string(arm.reach()) + " m");
    }

    PlanarArm work = arm;
    Vec2 error = target - fk(work).tip;
    double residual = error.norm();
    double damping = options.initial_damping;
    int iter = 0;
    for (; iter < options.max_iterations && residual >= options.tolerance; ++iter) {
        const auto jac = jacobian(work);
        const Eigen::Matrix2d jjt = jac * jac.transpose() + damping * damping * Eigen::Matrix2d::Identity();
        const Eigen::VectorXd step = jac.transpose() * jjt.ldlt().solve(error);

        PlanarArm trial = work;
        trial.joint_angles += step;
        const Vec2 trial_error = target - fk(trial).tip;
        const double trial_residual = trial_error.norm();
        if (trial_residual < residual) {
            work = std::move(trial);
            error = trial_error;
            residual = trial_residual;
            damping = std::max(damping * 0.5, 1e-9);
        } else {
            damping *= 4.0;
        }
    }
    if (residual >= options.tolerance) {
        throw ConvergenceError("ik did not converge, residual " + std::to_string(residual) + " m",
                               residual);
    }
    return {work.joint_angles, iter, residual};
}

Eigen::VectorXd sense_torques(const PlanarArm& arm, const Vec2& force, double noise_sigma, Rng& rng) {
    Eigen::VectorXd tau = jacobian(arm).transpose() * force;
    if (noise_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, noise_sigma);
        for (Eigen::Index j = 0; j < tau.size(); ++j) {
            tau[j] += noise(rng);
        }
    }
    return tau;
}

WorldStep step_world(const MediumWorld& world, const PlanarArm& arm, const Vec2& commanded_tip,
                     double dt, Rng& rng, const IkOptions& options) {
    if (!(dt > 0.0)) {
        throw InvalidArgument("world step needs dt > 0");
    }
    const Vec2 old_tip = fk(arm).tip;
    WorldStep out;
    out.arm = arm;
    out.arm.joint_angles = ik(arm, commanded_tip, options).angles;
    const Vec2 new_tip = fk(out.arm).tip;

    const MediumSample s = medium_at(world, new_tip);
    out.contact.medium = s.medium;
    out.contact.signed_distance = s.signed_distance;
    out.contact.tip_velocity = (new_tip - old_tip) / dt;
    out.contact.force = contact_force(world, new_tip, out.contact.tip_velocity);
    out.torques = sense_torques(out.arm, out.contact.force, world.noise_sigma, rng);
    return out;
}

} // namespace bcut
