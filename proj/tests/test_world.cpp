#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "bcut/errors.hpp"
#include "bcut/world.hpp"

using namespace bcut;

namespace {

MediumWorld wavy_world() {
    MediumWorld w;
    w.center = Vec2(0.01, -0.02);
    w.base_radius = 0.04;
    w.harmonics = {{2, 0.004, 0.3}, {3, 0.003, -1.1}, {5, 0.002, 2.0}};
    w.mu_pulp = 5.0;
    w.mu_peel = 15.0;
    w.peel_penalty = 200.0;
    return w;
}

PlanarArm three_link() {
    PlanarArm arm;
    arm.link_lengths = Eigen::Vector3d(0.12, 0.10, 0.06);
    arm.joint_angles = Eigen::Vector3d(-0.6, -0.9, -0.6);
    arm.base = Vec2(-0.10, 0.15);
    return arm;
}

// Dense polygon through the boundary, built straight from the curve's Fourier sum.
std::vector<Vec2> boundary_polygon(const MediumWorld& w, int n) {
    std::vector<Vec2> poly;
    for (int k = 0; k < n; ++k) {
        const double phi = 2.0 * std::numbers::pi * k / n;
        double r = w.base_radius;
        for (const auto& h : w.harmonics) {
            r += h.amplitude * std::cos(h.order * phi + h.phase);
        }
        poly.push_back(w.center + r * Vec2(std::cos(phi), std::sin(phi)));
    }
    return poly;
}

bool inside_polygon(const std::vector<Vec2>& poly, const Vec2& p) {
    bool in = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[j];
        if ((a.y() > p.y()) != (b.y() > p.y())) {
            const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
            if (p.x() < x) {
                in = !in;
            }
        }
    }
    return in;
}

// Radial distance to the curve along the ray through p, by bisection on the polygon membership test.
double oracle_signed_distance(const MediumWorld& w, const std::vector<Vec2>& poly, const Vec2& p) {
    const Vec2 u = (p - w.center).normalized();
    double lo = 0.0;
    double hi = 0.1;
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        (inside_polygon(poly, w.center + mid * u) ? lo : hi) = mid;
    }
    return (p - w.center).norm() - 0.5 * (lo + hi);
}

Eigen::Matrix3d homogeneous(double theta, double length) {
    Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
    rot.topLeftCorner<2, 2>() << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    Eigen::Matrix3d trans = Eigen::Matrix3d::Identity();
    trans(0, 2) = length;
    return rot * trans;
}

Vec2 chain_tip(const PlanarArm& arm) {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    m(0, 2) = arm.base.x();
    m(1, 2) = arm.base.y();
    for (Eigen::Index j = 0; j < arm.joints(); ++j) {
        m = m * homogeneous(arm.joint_angles[j], arm.link_lengths[j]);
    }
    return {m(0, 2), m(1, 2)};
}

} // namespace

TEST_SUITE("world") {

TEST_CASE("center is pulp") {
    const auto w = wavy_world();
    const auto s = medium_at(w, w.center);
    CHECK(s.medium == Medium::Pulp);
    CHECK(s.signed_distance == doctest::Approx(-w.radius(0.0)));
}

TEST_CASE("circle: point 1 cm outside is peel") {
    MediumWorld w;
    const auto s = medium_at(w, Vec2(0.05, 0.0));
    CHECK(s.medium == Medium::Peel);
    CHECK(s.signed_distance == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(medium_at(w, Vec2(0.04, 0.0)).medium == Medium::Peel);
    CHECK(medium_at(w, Vec2(0.0, 0.0399)).medium == Medium::Pulp);
}

TEST_CASE("signed distance matches a polygon root-find") {
    const auto w = wavy_world();
    const auto poly = boundary_polygon(w, 10000);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
    std::uniform_real_distribution<double> rad(0.005, 0.06);
    for (int i = 0; i < 200; ++i) {
        const double a = ang(rng);
        const Vec2 p = w.center + rad(rng) * Vec2(std::cos(a), std::sin(a));
        CHECK(std::abs(medium_at(w, p).signed_distance - oracle_signed_distance(w, poly, p)) < 1e-6);
    }
}

TEST_CASE("medium labels agree with point-in-polygon on random points") {
    const auto w = wavy_world();
    const auto poly = boundary_polygon(w, 10000);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.06, 0.06);
    int checked = 0;
    for (int i = 0; i < 10000; ++i) {
        const Vec2 p = w.center + Vec2(u(rng), u(rng));
        const auto s = medium_at(w, p);
        CHECK((s.medium == Medium::Peel) == (s.signed_distance >= 0.0));
        if (std::abs(s.signed_distance) < 1e-6) {
            continue;
        }
        ++checked;
        CHECK((s.medium == Medium::Pulp) == inside_polygon(poly, p));
    }
    CHECK(checked > 9900);
}

TEST_CASE("outward normal follows the numeric gradient of d") {
    const auto w = wavy_world();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
    const double h = 1e-7;
    for (int i = 0; i < 100; ++i) {
        const double a = ang(rng);
        const Vec2 p = w.center + (w.radius(a) + 0.001) * Vec2(std::cos(a), std::sin(a));
        const auto d = [&](const Vec2& q) { return medium_at(w, q).signed_distance; };
        Vec2 g((d(p + Vec2(h, 0)) - d(p - Vec2(h, 0))) / (2 * h), (d(p + Vec2(0, h)) - d(p - Vec2(0, h))) / (2 * h));
        const Vec2 n = boundary_normal(w, p);
        CHECK(n.norm() == doctest::Approx(1.0));
        CHECK((n - g.normalized()).norm() < 1e-6);
    }
}

TEST_CASE("no motion in pulp means no force") {
    const auto w = wavy_world();
    CHECK(contact_force(w, w.center + Vec2(0.01, 0.0), Vec2::Zero()).norm() == 0.0);
}

TEST_CASE("viscous law in pulp") {
    MediumWorld w;
    w.mu_pulp = 5.0;
    const Vec2 f = contact_force(w, Vec2(0.01, 0.0), Vec2(0.01, 0.0));
    CHECK(f.x() == doctest::Approx(-0.05).epsilon(1e-15));
    CHECK(f.y() == 0.0);
}

TEST_CASE("penalty push-back 2 mm inside the peel") {
    auto w = wavy_world();
    w.peel_penalty = 200.0;
    const double a = 0.7;
    Vec2 p = w.center + (w.radius(a) + 0.002) * Vec2(std::cos(a), std::sin(a));
    // Nudge radially until d is exactly 2 mm to within rounding.
    p = w.center + (p - w.center) * (1.0 + (0.002 - medium_at(w, p).signed_distance) / (p - w.center).norm());
    const Vec2 f = contact_force(w, p, Vec2::Zero());
    CHECK(f.norm() == doctest::Approx(0.4).epsilon(1e-9));

    const double h = 1e-7;
    const auto d = [&](const Vec2& q) { return medium_at(w, q).signed_distance; };
    const Vec2 g((d(p + Vec2(h, 0)) - d(p - Vec2(h, 0))) / (2 * h), (d(p + Vec2(0, h)) - d(p - Vec2(0, h))) / (2 * h));
    CHECK(f.normalized().dot(-g.normalized()) > 1.0 - 1e-9);
}

TEST_CASE("world validation") {
    auto w = wavy_world();
    CHECK_NOTHROW(w.validate());
    w.mu_peel = w.mu_pulp;
    CHECK_THROWS_AS(w.validate(), InvalidArgument);
    w = wavy_world();
    w.mu_pulp = 0.0;
    CHECK_THROWS_AS(w.validate(), InvalidArgument);
    w = wavy_world();
    w.harmonics = {{1, 0.05, 0.0}};
    CHECK_THROWS_AS(w.validate(), InvalidArgument);
}

TEST_CASE("world json round trip and hash") {
    auto w = wavy_world();
    w.noise_sigma = 0.003;
    w.seed = 0xfeedface12345ULL;
    const auto back = world_from_json(nlohmann::ordered_json::parse(to_json(w).dump()));
    CHECK(back == w);
    CHECK(world_hash(back) == world_hash(w));
    auto other = w;
    other.harmonics[1].phase += 1e-12;
    CHECK(world_hash(other) != world_hash(w));
}

TEST_CASE("straight chain") {
    PlanarArm arm = three_link();
    arm.joint_angles.setZero();
    const Vec2 tip = fk(arm).tip;
    CHECK(tip.x() == doctest::Approx(arm.base.x() + 0.28));
    CHECK(tip.y() == doctest::Approx(arm.base.y()));
}

TEST_CASE("two links at a right angle") {
    PlanarArm arm;
    arm.link_lengths = Eigen::Vector2d(1.0, 1.0);
    arm.joint_angles = Eigen::Vector2d(std::numbers::pi / 2, 0.0);
    arm.base = Vec2(0.5, -1.0);
    const auto pose = fk(arm);
    CHECK(pose.tip.x() == doctest::Approx(0.5));
    CHECK(pose.tip.y() == doctest::Approx(1.0));
    REQUIRE(pose.joint_positions.size() == 2);
    CHECK(pose.joint_positions[1].y() == doctest::Approx(0.0));
}

TEST_CASE("fk matches a homogeneous-transform chain") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-std::numbers::pi, std::numbers::pi);
    std::uniform_real_distribution<double> len(0.01, 0.3);
    for (int i = 0; i < 1000; ++i) {
        PlanarArm arm;
        const int n = 2 + i % 4;
        arm.link_lengths.resize(n);
        arm.joint_angles.resize(n);
        for (int j = 0; j < n; ++j) {
            arm.link_lengths[j] = len(rng);
            arm.joint_angles[j] = u(rng);
        }
        arm.base = Vec2(len(rng), -len(rng));
        CHECK((fk(arm).tip - chain_tip(arm)).norm() < 1e-12);
    }
}

TEST_CASE("jacobian of one unit link at zero") {
    PlanarArm arm;
    arm.link_lengths = Eigen::VectorXd::Ones(1);
    arm.joint_angles = Eigen::VectorXd::Zero(1);
    const auto jac = jacobian(arm);
    CHECK(jac(0, 0) == doctest::Approx(0.0));
    CHECK(jac(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("jacobian matches finite differences") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-std::numbers::pi, std::numbers::pi);
    const double h = 1e-6;
    for (int i = 0; i < 200; ++i) {
        PlanarArm arm = three_link();
        for (int j = 0; j < 3; ++j) {
            arm.joint_angles[j] = u(rng);
        }
        const auto jac = jacobian(arm);
        for (int j = 0; j < 3; ++j) {
            PlanarArm plus = arm;
            PlanarArm minus = arm;
            plus.joint_angles[j] += h;
            minus.joint_angles[j] -= h;
            const Vec2 col = (fk(plus).tip - fk(minus).tip) / (2 * h);
            CHECK((col - jac.col(j)).norm() < 1e-6);
        }
    }
}

TEST_CASE("zero-length link gives a zero column") {
    PlanarArm arm = three_link();
    arm.link_lengths[2] = 0.0;
    CHECK(jacobian(arm).col(2).norm() == 0.0);
}

TEST_CASE("ik at the current tip needs no iterations") {
    const PlanarArm arm = three_link();
    const auto sol = ik(arm, fk(arm).tip);
    CHECK(sol.iterations == 0);
    CHECK(sol.angles == arm.joint_angles);
}

TEST_CASE("ik round trip on random reachable targets") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-std::numbers::pi, std::numbers::pi);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        PlanarArm goal = three_link();
        for (int j = 0; j < 3; ++j) {
            goal.joint_angles[j] = u(rng);
        }
        const Vec2 target = fk(goal).tip;
        const auto sol = ik(three_link(), target);
        PlanarArm reached = three_link();
        reached.joint_angles = sol.angles;
        worst = std::max(worst, (fk(reached).tip - target).norm());
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("ik rejects targets beyond reach") {
    const PlanarArm arm = three_link();
    CHECK_THROWS_AS(ik(arm, arm.base + Vec2(arm.reach() + 0.1, 0.0)), OutOfWorkspace);
}

TEST_CASE("ik reports its residual when the iteration cap is hit") {
    const PlanarArm arm = three_link();
    IkOptions opts;
    opts.max_iterations = 1;
    try {
        ik(arm, arm.base + Vec2(0.0, -0.2), opts);
        FAIL("expected a convergence error");
    } catch (const ConvergenceError& e) {
        CHECK(e.residual() > opts.tolerance);
    }
}

TEST_CASE("torques: zero force and no noise") {
    Rng rng(1);
    CHECK(sense_torques(three_link(), Vec2::Zero(), 0.0, rng).norm() == 0.0);
}

TEST_CASE("torques equal J^T F without noise") {
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        PlanarArm arm = three_link();
        for (int j = 0; j < 3; ++j) {
            arm.joint_angles[j] = u(gen);
        }
        const Vec2 f(u(gen), u(gen));
        const auto jac = jacobian(arm);
        const auto tau = sense_torques(arm, f, 0.0, rng);
        for (int j = 0; j < 3; ++j) {
            CHECK(tau[j] == jac(0, j) * f.x() + jac(1, j) * f.y());
        }
    }
}

TEST_CASE("torque noise is seeded and has the configured spread") {
    Rng a(42);
    Rng b(42);
    double sum = 0.0;
    double sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const auto ta = sense_torques(three_link(), Vec2::Zero(), 0.01, a);
        const auto tb = sense_torques(three_link(), Vec2::Zero(), 0.01, b);
        REQUIRE(ta == tb);
        sum += ta[0];
        sq += ta[0] * ta[0];
    }
    CHECK(std::abs(sum / n) < 5 * 0.01 / std::sqrt(double(n)));
    CHECK(std::sqrt(sq / n) == doctest::Approx(0.01).epsilon(0.03));
}

TEST_CASE("commanding the current tip: zero velocity, zero force") {
    MediumWorld w;
    w.center = Vec2(0.0, 0.0);
    PlanarArm arm = three_link();
    arm.joint_angles = ik(arm, Vec2(-0.02, -0.01)).angles;
    Rng rng(1);
    const auto step = step_world(w, arm, fk(arm).tip, 0.1, rng);
    CHECK(step.contact.tip_velocity.norm() == 0.0);
    CHECK(step.contact.force.norm() == 0.0);
    CHECK(step.torques.norm() == 0.0);
}

TEST_CASE("constant-speed line through pulp: constant force, torques follow J^T F") {
    MediumWorld w;
    PlanarArm arm = three_link();
    const Vec2 start(-0.02, 0.0);
    const Vec2 v(0.02, -0.01);
    const double dt = 0.05;
    arm.joint_angles = ik(arm, start).angles;
    Rng rng(1);
    std::vector<Eigen::VectorXd> torques;
    Vec2 first_force = Vec2::Zero();
    // Each tip lands within the ik tolerance, so the finite-difference velocity can be off by 2 tol / dt.
    const double bound = w.mu_pulp * 2.0 * IkOptions{}.tolerance / dt;
    for (int k = 1; k <= 20; ++k) {
        const auto step = step_world(w, arm, start + double(k) * dt * v, dt, rng);
        REQUIRE(step.contact.medium == Medium::Pulp);
        if (k == 1) {
            first_force = step.contact.force;
        }
        CHECK((step.contact.force - first_force).norm() < 2.0 * bound);
        CHECK((step.contact.force - (-w.mu_pulp * v)).norm() < bound);
        CHECK((step.torques - jacobian(step.arm).transpose() * step.contact.force).norm() < 1e-15);
        torques.push_back(step.torques);
        arm = step.arm;
    }
    // The posture changes only a little over a 2 cm stroke, so the torques barely move.
    for (const auto& t : torques) {
        CHECK((t - torques.front()).norm() < 0.25 * torques.front().norm());
    }
}

TEST_CASE("torque norm jumps when the tip crosses into the peel") {
    MediumWorld w;
    PlanarArm arm = three_link();
    const Vec2 dir = Vec2(-1.0, -1.0).normalized();
    const double dt = 0.05;
    double s = 0.030;
    arm.joint_angles = ik(arm, s * dir).angles;
    Rng rng(1);
    double prev_norm = -1.0;
    Medium prev = Medium::Pulp;
    bool crossed = false;
    for (int k = 0; k < 15; ++k) {
        s += 0.0013;
        const auto step = step_world(w, arm, s * dir, dt, rng);
        if (prev == Medium::Pulp && step.contact.medium == Medium::Peel) {
            CHECK(step.torques.norm() > prev_norm);
            crossed = true;
        }
        prev = step.contact.medium;
        prev_norm = step.torques.norm();
        arm = step.arm;
    }
    CHECK(crossed);
}

TEST_CASE("peel torques exceed pulp torques at equal speed") {
    const auto w = wavy_world();
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> ang(0.0, 2 * std::numbers::pi);
    std::uniform_real_distribution<double> depth(0.0005, 0.015);
    Rng noise(1);
    double pulp = 0.0;
    double peel = 0.0;
    const int n = 500;
    for (int i = 0; i < n; ++i) {
        const double a = ang(rng);
        const Vec2 radial(std::cos(a), std::sin(a));
        const Vec2 vel = 0.03 * Vec2(std::cos(ang(rng)), std::sin(ang(rng)));
        const double r = w.radius(a);
        const Vec2 in = w.center + (r - depth(rng)) * radial;
        const Vec2 out = w.center + (r + 0.1 * depth(rng)) * radial;
        PlanarArm arm = three_link();
        arm.joint_angles = ik(arm, in).angles;
        pulp += sense_torques(arm, contact_force(w, in, vel), 0.0, noise).norm();
        arm.joint_angles = ik(arm, out).angles;
        peel += sense_torques(arm, contact_force(w, out, vel), 0.0, noise).norm();
    }
    CHECK(peel / n > pulp / n);
}

TEST_CASE("identical seeds and commands give identical steps") {
    auto w = wavy_world();
    w.noise_sigma = 0.01;
    auto run = [&] {
        PlanarArm arm = three_link();
        arm.joint_angles = ik(arm, Vec2(-0.03, 0.0)).angles;
        Rng rng(77);
        std::vector<Eigen::VectorXd> out;
        for (int k = 1; k <= 10; ++k) {
            const auto step = step_world(w, arm, Vec2(-0.03 + 0.004 * k, -0.003 * k), 0.1, rng);
            out.push_back(step.torques);
            arm = step.arm;
        }
        return out;
    };
    CHECK(run() == run());
}

TEST_CASE("world step rejects a non-positive dt") {
    Rng rng(1);
    const PlanarArm arm = three_link();
    CHECK_THROWS_AS(step_world(MediumWorld{}, arm, fk(arm).tip, 0.0, rng), InvalidArgument);
}

} // TEST_SUITE
