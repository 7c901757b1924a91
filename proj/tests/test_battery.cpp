#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "dst/battery.hpp"
#include "dst/common.hpp"

using namespace dst;

TEST_CASE("step examples") {
    BatteryParams b;
    b.eta_c = 0.9;
    b.c_deg = 0.0;
    b.p_max = 1.0;

    const auto idle = step({0.4, {25.0}, 0}, {0.0, 0.0}, b);
    CHECK(idle.next_soc == 0.4);
    CHECK(idle.reward == 0.0);

    const auto charge = step({0.0, {10.0}, 0}, {1.0, 0.0}, b);
    CHECK(charge.next_soc == doctest::Approx(0.9));
    CHECK(charge.reward == doctest::Approx(-10.0));

    try {
        step({0.0, {10.0}, 3}, {0.0, 0.5}, b);
        FAIL("expected infeasible action");
    } catch (const InfeasibleAction& e) {
        CHECK(std::string(e.what()).find("soc_min") != std::string::npos);
    }
    CHECK_THROWS_AS(step({0.5, {10.0}, 0}, {1.5, 0.0}, b), InfeasibleAction);
    CHECK_THROWS_AS(step({0.5, {10.0}, 0}, {-0.1, 0.0}, b), InfeasibleAction);
    CHECK_THROWS_AS(step({0.5, {10.0}, 0}, {0.0, 0.0}, b, 1), InvalidInput);
}

TEST_CASE("settlement uses the trading dimension") {
    BatteryParams b;
    b.c_deg = 0.0;
    const auto r = step({0.5, {10.0, 99.0}, 0}, {0.0, 0.25}, b, 1);
    CHECK(r.reward == doctest::Approx(99.0 * 0.25));
}

TEST_CASE("steps within tolerance snap onto the bound") {
    BatteryParams b;
    b.eta_c = 1.0;
    b.eta_d = 1.0;
    b.p_max = 1.0;
    const auto r = step({0.3, {1.0}, 0}, {0.0, 0.3 + 5e-10}, b);
    CHECK(r.next_soc == 0.0);
}

TEST_CASE("validate_plan") {
    BatteryParams b;
    CHECK_FALSE(validate_plan(0.0, {}, b).has_value());

    // charging at p_max crosses soc_max at hour ceil((soc_max - soc0) / (eta_c p_max dt)) - 1
    b.soc_max = 1.0;
    b.p_max = 0.3;
    b.eta_c = 0.9;
    const double soc0 = 0.1;
    const auto first_over = static_cast<std::size_t>(std::ceil((b.soc_max - soc0) / (b.eta_c * b.p_max * b.dt)));
    std::vector<HourlyAction> plan(first_over + 3, {b.p_max, 0.0});
    const auto v = validate_plan(soc0, plan, b);
    REQUIRE(v.has_value());
    CHECK(v->hour == first_over - 1);
    CHECK(v->bound == "soc_max");

    BatteryParams u;
    u.p_max = 1.0;
    u.eta_c = u.eta_d = 1.0;
    u.c_deg = 0.0;
    CHECK_FALSE(validate_plan(0.0, {{1.0, 0.0}, {0.0, 1.0}}, u).has_value());
}

TEST_CASE("parameter validation") {
    BatteryParams b;
    CHECK_NOTHROW(b.validate());
    b.soc_min = b.soc_max;
    CHECK_THROWS_AS(b.validate(), InvalidInput);
    CHECK_NOTHROW(b.validate(true));
    b = {};
    b.eta_c = 1.2;
    CHECK_THROWS_AS(b.validate(), InvalidInput);
    b = {};
    b.c_deg = -1.0;
    CHECK_THROWS_AS(b.validate(), InvalidInput);
    b = {};
    b.soc_max = 2.0;
    CHECK_THROWS_AS(b.validate(), InvalidInput);
}

TEST_CASE("energy accounting over random feasible plans") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        BatteryParams b;
        b.capacity = 2.0;
        b.soc_max = 2.0;
        b.p_max = 0.5;
        b.eta_c = 0.8 + 0.2 * u(rng);
        b.eta_d = 0.8 + 0.2 * u(rng);
        double soc = 1.0;
        double net = 0.0;
        for (int h = 0; h < 48; ++h) {
            // pick a random action that stays inside the bounds
            const double room_c = (b.soc_max - soc) / (b.eta_c * b.dt);
            const double room_d = (soc - b.soc_min) * b.eta_d / b.dt;
            HourlyAction a{u(rng) < 0.5 ? std::min(b.p_max, room_c) * u(rng) : 0.0,
                           u(rng) < 0.5 ? std::min(b.p_max, room_d) * u(rng) * 0.5 : 0.0};
            if (a.p_c > 0) a.p_d = 0.0;
            soc = step({soc, {30.0}, 0}, a, b).next_soc;
            net += (b.eta_c * a.p_c - a.p_d / b.eta_d) * b.dt;
        }
        CHECK(std::abs((soc - 1.0) - net) <= 1e-9);
    }
}

TEST_CASE("constant prices admit no profitable round trip") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        BatteryParams b;
        b.p_max = 1.0;
        b.eta_c = trial % 2 ? 1.0 : 0.9;
        b.eta_d = trial % 2 ? 1.0 : 0.85;
        b.c_deg = trial % 2 ? 0.5 : 0.0;
        const double lambda = 5.0 + 50.0 * u(rng);
        // charge then discharge back to the start
        const double pc = 0.1 + 0.9 * u(rng);
        const double stored = b.eta_c * pc * b.dt;
        const double pd = stored * b.eta_d / b.dt;
        auto s1 = step({0.0, {lambda}, 0}, {pc, 0.0}, b);
        auto s2 = step({s1.next_soc, {lambda}, 1}, {0.0, std::min(pd, b.p_max)}, b);
        CHECK(s1.reward + s2.reward < 0.0);
    }
}

TEST_CASE("reward is linear in the action") {
    BatteryParams b;
    b.c_deg = 1.5;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const double lambda = 100.0 * u(rng) - 20.0;
        const HourlyAction a{u(rng), u(rng)};
        const double want = (-lambda * b.dt - b.c_deg * b.dt) * a.p_c + (lambda * b.dt - b.c_deg * b.dt) * a.p_d;
        CHECK(step_reward(lambda, a, b) == doctest::Approx(want).epsilon(1e-14));
        const HourlyAction a2{2.0 * a.p_c, 2.0 * a.p_d};
        CHECK(step_reward(lambda, a2, b) == doctest::Approx(2.0 * step_reward(lambda, a, b)).epsilon(1e-14));
    }
}
