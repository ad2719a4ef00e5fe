#include <doctest.h>

#include <cmath>
#include <random>

#include "bcut/dmp.hpp"
#include "bcut/errors.hpp"

using namespace bcut;

namespace {

Dmp make_dmp(std::vector<double> weights, double g, double y0, double tau = 1.0, double alpha_x = 4.6) {
    CanonicalSystem cs;
    cs.alpha_x = alpha_x;
    cs.tau = tau;
    BasisSet basis = BasisSet::spaced_in_time(weights.size(), alpha_x);
    TransformationSystem ts;
    ts.goal = g;
    ts.start = y0;
    ts.weights = std::move(weights);
    return Dmp::create(cs, basis, {ts});
}

std::vector<double> random_weights(std::size_t n, std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<double> w(n);
    for (auto& v : w) {
        v = u(rng);
    }
    return w;
}

// Linear interpolation of dimension 0 at time t.
double sample_at(const Trajectory& tr, double t) {
    const double k = t / tr.dt;
    const auto i = static_cast<std::size_t>(std::floor(k));
    if (i + 1 >= tr.points.size()) {
        return tr.points.back().y[0];
    }
    const double a = k - static_cast<double>(i);
    return (1.0 - a) * tr.points[i].y[0] + a * tr.points[i + 1].y[0];
}

} // namespace

TEST_SUITE("dmp") {

TEST_CASE("one Euler step of the phase") {
    CanonicalSystem cs{1.0, 1.0, 1.0};
    CHECK(canonical_step(cs, 0.01).x == doctest::Approx(0.99).epsilon(1e-15));
}

TEST_CASE("phase integrated to t = tau lands near exp(-alpha_x)") {
    CanonicalSystem cs{4.6, 1.0, 1.0};
    for (int i = 0; i < 1000; ++i) {
        cs = canonical_step(cs, 1e-3);
    }
    CHECK(std::abs(cs.x - std::exp(-4.6)) < 1e-3);
}

TEST_CASE("non-positive phase step is rejected") {
    CanonicalSystem cs{4.6, 1.0, 1.0};
    CHECK_THROWS_AS(canonical_step(cs, 0.0), InvalidArgument);
    CHECK_THROWS_AS(canonical_step(cs, -0.1), InvalidArgument);
}

TEST_CASE("phase decreases strictly and stays positive for dt below tau/alpha_x") {
    for (double frac : {0.01, 0.3, 0.9, 0.999}) {
        CanonicalSystem cs{4.6, 2.0, 1.0};
        const double dt = frac * cs.tau / cs.alpha_x;
        double prev = cs.x;
        for (int i = 0; i < 2000; ++i) {
            cs = canonical_step(cs, dt);
            REQUIRE(cs.x > 0.0);
            REQUIRE(cs.x < prev);
            prev = cs.x;
            if (cs.x < 1e-250) {
                break;
            }
        }
    }
}

TEST_CASE("a huge step is clamped to stay positive") {
    CanonicalSystem cs{4.6, 1.0, 1.0};
    CHECK(canonical_step(cs, 10.0).x > 0.0);
}

TEST_CASE("basis activation peaks at its own center") {
    const auto basis = BasisSet::spaced_in_time(10, 4.6);
    for (std::size_t k = 0; k < basis.size(); ++k) {
        CHECK(basis_activations(basis, basis.centers[k])[k] == 1.0);
    }
}

TEST_CASE("very narrow kernels vanish away from their center") {
    BasisSet basis{{0.5}, {1e12}};
    CHECK(basis_activations(basis, 0.6)[0] < 1e-300);
}

TEST_CASE("three-kernel activations match the Gaussian formula") {
    BasisSet basis{{1.0, 0.5, 0.1}, {4.0, 4.0, 4.0}};
    const auto psi = basis_activations(basis, 0.5);
    REQUIRE(psi.size() == 3);
    CHECK(psi[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(psi[1] == 1.0);
    CHECK(psi[2] == doctest::Approx(std::exp(-0.64)).epsilon(1e-15));
}

TEST_CASE("time-spaced basis layout") {
    const std::size_t n = 50;
    const auto basis = BasisSet::spaced_in_time(n, 4.6);
    REQUIRE(basis.size() == n);
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(basis.centers[i] == doctest::Approx(std::exp(-4.6 * double(i) / double(n - 1))));
        CHECK(basis.widths[i] > 0.0);
        if (i + 1 < n) {
            CHECK(basis.centers[i + 1] < basis.centers[i]);
            const double gap = basis.centers[i + 1] - basis.centers[i];
            CHECK(basis.widths[i] == doctest::Approx(1.0 / (gap * gap)));
        }
    }
    CHECK(basis.widths[n - 1] == basis.widths[n - 2]);
}

TEST_CASE("activations never all vanish on the phase interval") {
    // Far-away kernels of a 50-wide basis underflow to exactly 0; the sum must not.
    const auto basis = BasisSet::spaced_in_time(50, 4.6);
    for (int k = 1; k <= 10000; ++k) {
        const double x = double(k) / 10000.0;
        double sum = 0.0;
        for (double p : basis_activations(basis, x)) {
            REQUIRE(p >= 0.0);
            REQUIRE(p <= 1.0);
            sum += p;
        }
        REQUIRE(sum > 0.0);
    }
}

TEST_CASE("forcing term with zero weights is zero") {
    const auto dmp = make_dmp(std::vector<double>(20, 0.0), 1.0, 0.0);
    for (double x : {1.0, 0.5, 0.01}) {
        CHECK(forcing_term(dmp, x, 0) == 0.0);
    }
}

TEST_CASE("forcing term vanishes as the phase goes to zero") {
    const auto dmp = make_dmp(random_weights(20, 3, 50.0), 1.0, 0.0);
    double prev = std::abs(forcing_term(dmp, 1e-3, 0));
    for (double x : {1e-5, 1e-7, 1e-9}) {
        const double f = std::abs(forcing_term(dmp, x, 0));
        CHECK(f < prev);
        prev = f;
    }
    CHECK(prev < 1e-6);
}

TEST_CASE("unit weights collapse the normalized sum") {
    const auto dmp = make_dmp(std::vector<double>(20, 1.0), 0.3, -0.2);
    for (double x : {1.0, 0.7, 0.2, 0.03}) {
        CHECK(forcing_term(dmp, x, 0) == doctest::Approx(x * 0.5).epsilon(1e-12));
    }
}

TEST_CASE("goal equal to start disables forcing with a warning") {
    const auto dmp = make_dmp(random_weights(10, 1, 100.0), 0.2, 0.2);
    CHECK(forcing_term(dmp, 0.5, 0) == 0.0);
    REQUIRE(dmp.warnings().size() == 1);
    const auto traj = rollout(dmp, 1e-3, 2000);
    for (const auto& p : traj.points) {
        CHECK(p.y[0] == 0.2);
    }
}

TEST_CASE("zero-forcing system converges to the goal") {
    const auto dmp = make_dmp(std::vector<double>(20, 0.0), 1.0, 0.0);
    const auto traj = rollout(dmp, 1e-3, 3000);
    CHECK(traj.points.size() == 3001);
    CHECK(std::abs(traj.points.back().y[0] - 1.0) < 1e-3);
}

TEST_CASE("any weights converge to the goal by ten time constants") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto dmp = make_dmp(random_weights(30, seed, 400.0), 0.7, -0.1);
        const auto traj = rollout(dmp, 1e-3, 10000);
        CHECK(std::abs(traj.points.back().y[0] - 0.7) < 1e-3 * 0.8);
    }
}

TEST_CASE("doubling tau stretches the rollout in time") {
    const auto a = make_dmp(random_weights(30, 7, 300.0), 1.0, 0.0, 1.0);
    const auto b = a.with_tau(2.0);
    const auto ta = rollout(a, 1e-4, 10000);
    const auto tb = rollout(b, 2e-4, 10000);
    double worst = 0.0;
    for (std::size_t i = 0; i < ta.points.size(); i += 10) {
        const double t = ta.dt * double(i);
        worst = std::max(worst, std::abs(sample_at(tb, 2.0 * t) - ta.points[i].y[0]));
    }
    CHECK(worst < 1e-3);

    // Same dt for both, resampled by interpolation.
    const auto tb_fine = rollout(b, 1e-4, 20000);
    worst = 0.0;
    for (std::size_t i = 0; i < ta.points.size(); i += 10) {
        const double t = ta.dt * double(i);
        worst = std::max(worst, std::abs(sample_at(tb_fine, 2.0 * t) - ta.points[i].y[0]));
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("normalized rollouts are invariant to the goal") {
    const auto a = make_dmp(random_weights(30, 11, 300.0), 1.0, 0.0);
    const auto b = a.with_goal(0, -3.5);
    const auto ta = rollout(a, 1e-3, 1500);
    const auto tb = rollout(b, 1e-3, 1500);
    double worst = 0.0;
    for (std::size_t i = 0; i < ta.points.size(); ++i) {
        const double za = (ta.points[i].y[0] - 0.0) / (1.0 - 0.0);
        const double zb = (tb.points[i].y[0] - 0.0) / (-3.5 - 0.0);
        worst = std::max(worst, std::abs(za - zb));
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("stepping reproduces rollout exactly") {
    const auto dmp = make_dmp(random_weights(25, 5, 200.0), 0.4, 0.1, 1.3);
    const std::size_t horizon = 700;
    const auto traj = rollout(dmp, 2e-3, horizon);
    DmpState s = initial_state(dmp);
    for (std::size_t k = 0; k <= horizon; ++k) {
        REQUIRE(s.y[0] == traj.points[k].y[0]);
        REQUIRE(s.dy[0] == traj.points[k].dy[0]);
        if (k < horizon) {
            s = step_dmp(dmp, s, 2e-3);
        }
    }
}

TEST_CASE("stepping with dt = 0 is rejected") {
    const auto dmp = make_dmp(std::vector<double>(5, 0.0), 1.0, 0.0);
    CHECK_THROWS_AS(step_dmp(dmp, initial_state(dmp), 0.0), InvalidArgument);
    CHECK_THROWS_AS(rollout(dmp, 0.0, 10), InvalidArgument);
}

TEST_CASE("goal is a fixed point once the forcing has died out") {
    const auto dmp = make_dmp(random_weights(20, 9, 100.0), 0.5, 0.0);
    DmpState s;
    s.y = {0.5};
    s.dy = {0.0};
    s.x = 1e-12;
    for (int i = 0; i < 5000; ++i) {
        s = step_dmp(dmp, s, 1e-3);
    }
    CHECK(std::abs(s.y[0] - 0.5) < 1e-9);
}

TEST_CASE("fit recovers the rollout of a known primitive") {
    const auto truth = make_dmp(random_weights(30, 21, 300.0), 0.8, 0.1, 1.0);
    const auto demo = rollout(truth, 1e-3, 1000);
    DmpConfig cfg;
    cfg.basis_count = 30;
    const auto fitted = fit_dmp(demo, cfg);
    const auto again = rollout(fitted, 1e-3, 1000);
    double ss = 0.0;
    for (std::size_t i = 0; i < demo.points.size(); ++i) {
        const double e = again.points[i].y[0] - demo.points[i].y[0];
        ss += e * e;
    }
    const double rmse = std::sqrt(ss / double(demo.points.size()));
    CHECK(rmse < 0.01 * 0.7);
}

TEST_CASE("constant-velocity line settles on its endpoint") {
    std::vector<std::vector<double>> pos;
    for (int i = 0; i <= 1000; ++i) {
        pos.push_back({0.2 + 0.5 * double(i) / 1000.0});
    }
    const auto demo = trajectory_from_positions(1e-3, pos);
    DmpConfig cfg;
    cfg.basis_count = 20;
    const auto dmp = fit_dmp(demo, cfg);
    const auto traj = rollout(dmp, 1e-3, 3000);
    CHECK(std::abs(traj.points.back().y[0] - 0.7) < 1e-3 * 0.5);
    // At t = tau the path is already close, just not settled.
    CHECK(std::abs(traj.points[1000].y[0] - 0.7) < 0.01 * 0.5);
}

TEST_CASE("too-short demonstrations are rejected") {
    Trajectory one;
    one.dt = 1e-3;
    one.points.push_back({{0.0}, {0.0}, {0.0}});
    CHECK_THROWS_AS(fit_dmp(one, DmpConfig{}), InvalidArgument);

    std::vector<std::vector<double>> pos(99, std::vector<double>{0.0});
    CHECK_THROWS_AS(fit_dmp(trajectory_from_positions(0.01, pos), DmpConfig{}), InvalidArgument);
}

TEST_CASE("central differences of a quadratic are exact") {
    std::vector<std::vector<double>> pos;
    const double dt = 0.01;
    for (int i = 0; i <= 100; ++i) {
        const double t = dt * i;
        pos.push_back({3.0 * t * t - t, 1.0});
    }
    const auto tr = trajectory_from_positions(dt, pos);
    CHECK(tr.dims() == 2);
    CHECK(tr.duration() == doctest::Approx(1.0));
    for (std::size_t i = 2; i + 2 < tr.points.size(); ++i) {
        const double t = dt * double(i);
        CHECK(tr.points[i].dy[0] == doctest::Approx(6.0 * t - 1.0).epsilon(1e-9));
        CHECK(tr.points[i].ddy[0] == doctest::Approx(6.0).epsilon(1e-6));
        CHECK(tr.points[i].dy[1] == 0.0);
    }
}

TEST_CASE("json round trip keeps every number and the key order") {
    std::vector<std::vector<double>> pos;
    for (int i = 0; i <= 400; ++i) {
        const double s = double(i) / 400.0;
        pos.push_back({std::sin(2.0 * s) + s, 0.1 * std::cos(5.0 * s)});
    }
    const auto dmp = fit_dmp(trajectory_from_positions(2.0 / 400.0, pos), DmpConfig{});
    const auto doc = to_json(dmp);
    std::vector<std::string> keys;
    for (const auto& [k, v] : doc.items()) {
        keys.push_back(k);
    }
    CHECK(keys == std::vector<std::string>{"alpha_x", "tau", "alpha_z", "beta_z", "N", "centers", "widths", "dims",
                                           "systems"});
    const auto back = dmp_from_json(nlohmann::ordered_json::parse(doc.dump()));
    CHECK(back.tau() == dmp.tau());
    CHECK(back.basis().centers == dmp.basis().centers);
    CHECK(back.basis().widths == dmp.basis().widths);
    REQUIRE(back.dims() == 2);
    for (std::size_t d = 0; d < 2; ++d) {
        CHECK(back.systems()[d].weights == dmp.systems()[d].weights);
        CHECK(back.systems()[d].goal == dmp.systems()[d].goal);
        CHECK(back.systems()[d].start == dmp.systems()[d].start);
    }
    CHECK(back.systems()[0].beta_z == dmp.systems()[0].alpha_z / 4.0);
}

TEST_CASE("malformed primitive documents are rejected") {
    CHECK_THROWS_AS(dmp_from_json(nlohmann::ordered_json::parse(R"({"alpha_x": 4.6})")), InvalidArgument);
}

} // TEST_SUITE
