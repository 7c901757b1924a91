#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "dst/harness.hpp"
#include "dst/synthetic_samplers.hpp"
#include "json.hpp"

using namespace dst;

namespace {

BatteryParams unit_battery() {
    BatteryParams b;
    b.p_max = 1.0;
    b.eta_c = 1.0;
    b.eta_d = 1.0;
    b.c_deg = 0.0;
    return b;
}

HarnessConfig small_config() {
    HarnessConfig cfg;
    cfg.tree = TreeConfig{2, 4, 16, 2, 2, 1, 0};
    return cfg;
}

Matrix random_series(std::uint64_t seed, std::size_t rows) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 80.0);
    Matrix m(rows, 1);
    for (std::size_t t = 0; t < rows; ++t) m(t, 0) = u(rng);
    return m;
}

GaussianARSampler ar_sampler() {
    return GaussianARSampler({Matrix(1, 1, 0.6), {16.0}, {12.0}});
}

}  // namespace

TEST_CASE("policy names") {
    for (auto k : all_policies()) CHECK(parse_policy(to_string(k)) == k);
    CHECK(to_string(PolicyKind::DstTree) == "dst_smpc");
    CHECK(all_policies().size() == 6);
    CHECK_THROWS_AS(parse_policy("dst"), InvalidInput);
}

TEST_CASE("two-hour path plan") {
    const auto plan = plan_path({10.0, 30.0}, unit_battery(), {}, 0.0);
    CHECK(plan.objective == doctest::Approx(20.0).epsilon(1e-12));
    REQUIRE(plan.actions.size() == 2);
    CHECK(plan.actions[0].p_c == doctest::Approx(1.0));
    CHECK(plan.actions[0].p_d == doctest::Approx(0.0));
    CHECK(plan.actions[1].p_c == doctest::Approx(0.0));
    CHECK(plan.actions[1].p_d == doctest::Approx(1.0));
    CHECK(plan_path({}, unit_battery(), {}, 0.0).actions.empty());
}

TEST_CASE("mean_path and cancelling forecasts") {
    const std::vector<std::vector<double>> mirrored{{10.0, 30.0}, {30.0, 10.0}};
    CHECK(mean_path(mirrored) == std::vector<double>{20.0, 20.0});
    CHECK_THROWS_AS(mean_path({}), InvalidInput);
    CHECK_THROWS_AS(mean_path({{1.0}, {1.0, 2.0}}), InvalidInput);

    BatteryParams b;  // lossy, with degradation cost
    const auto det = plan_path(mean_path(mirrored), b, {}, 0.0);
    const auto mc = plan_mc_smpc(mirrored, b, {}, 0.0);
    for (const auto& plan : {det, mc}) {
        CHECK(plan.objective == doctest::Approx(0.0));
        for (const auto& a : plan.actions) {
            CHECK(std::abs(a.p_c) < 1e-12);
            CHECK(std::abs(a.p_d) < 1e-12);
        }
    }
}

TEST_CASE("one scenario: mc equals the path plan") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 50.0);
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<double> p(8);
        for (auto& v : p) v = u(rng);
        const auto a = plan_path(p, BatteryParams{}, {}, 0.3);
        const auto b = plan_mc_smpc({p}, BatteryParams{}, {}, 0.3);
        CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-12));
    }
}

TEST_CASE("chain tree equals the path plan on its blocks") {
    ScenarioTree tree(TreeConfig{2, 3, 1, 1, 1, 1, 0}, Matrix::from_rows({{5.0}, {40.0}, {12.0}}));
    const NodeId a = tree.add_child(0, Matrix::from_rows({{3.0}, {60.0}, {20.0}}), 1.0);
    tree.add_child(a, Matrix::from_rows({{1.0}, {2.0}, {90.0}}), 1.0);
    const auto chain = plan_dst_smpc(tree, BatteryParams{}, {}, 0.0);
    const auto path = plan_path({5, 40, 12, 3, 60, 20, 1, 2, 90}, BatteryParams{}, {}, 0.0);
    CHECK(chain.objective == doctest::Approx(path.objective).epsilon(1e-12));
    REQUIRE(chain.actions.size() == 3);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(chain.actions[j].p_c == doctest::Approx(path.actions[j].p_c));
        CHECK(chain.actions[j].p_d == doctest::Approx(path.actions[j].p_d));
    }
}

TEST_CASE("branching tree values recourse over the open-loop plan") {
    // root 10; then 50 or -20 with equal odds
    ScenarioTree tree(TreeConfig{1, 1, 1, 2, 2, 1, 0}, Matrix(1, 1, 10.0));
    tree.add_child(0, Matrix(1, 1, 50.0), 0.5);
    tree.add_child(0, Matrix(1, 1, -20.0), 0.5);
    const auto tree_plan = plan_dst_smpc(tree, unit_battery(), {}, 0.0);
    const auto open_loop = plan_mc_smpc({{10.0, 50.0}, {10.0, -20.0}}, unit_battery(), {}, 0.0);
    // the tree holds the charge in the low branch, the open-loop plan cannot
    CHECK(tree_plan.objective == doctest::Approx(15.0));
    CHECK(open_loop.objective == doctest::Approx(5.0));
    CHECK(tree_plan.actions[0].p_c == doctest::Approx(1.0));
}

TEST_CASE("forecast_paths starts with the realized block") {
    const Matrix hist = random_series(1, 12);
    const auto s = ar_sampler();
    const auto paths = forecast_paths(s, hist, 5, 4, 2, 0, 17);
    REQUIRE(paths.size() == 5);
    for (const auto& p : paths) {
        REQUIRE(p.size() == 12);
        for (std::size_t j = 0; j < 4; ++j) CHECK(p[j] == hist(8 + j, 0));
    }
    CHECK(paths == forecast_paths(s, hist, 5, 4, 2, 0, 17));
    CHECK_THROWS_AS(forecast_paths(s, Matrix(3, 1, 0.0), 5, 4, 2, 0, 0), InvalidInput);
}

TEST_CASE("max_epochs") {
    const TreeConfig tc{2, 6, 8, 2, 2, 1, 0};
    CHECK(max_epochs(100, 10, tc) == 13);
    CHECK(max_epochs(28, 10, tc) == 1);
    CHECK(max_epochs(27, 10, tc) == 0);
    CHECK(max_epochs(0, 0, tc) == 0);
}

TEST_CASE("flat prices: every policy idles") {
    auto cfg = small_config();
    const Matrix prices(40, 1, 25.0);
    const ConstantSampler s(Matrix(4, 1, 25.0));
    for (auto kind : all_policies()) {
        CAPTURE(to_string(kind));
        const auto r = run_episode(kind, prices, &s, cfg, 4, 0, 1);
        CHECK(r.epochs.size() == max_epochs(40, 4, cfg.tree));
        CHECK(std::abs(r.total_reward) < 1e-9);
        CHECK(r.final_soc == 0.0);
        for (const auto& log : r.epochs) {
            for (const auto& a : log.plan) {
                CHECK(std::abs(a.p_c) < 1e-12);
                CHECK(std::abs(a.p_d) < 1e-12);
            }
        }
    }
}

TEST_CASE("zero-variance forecasts reproduce the oracle") {
    auto cfg = small_config();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Matrix prices = random_series(seed, 48);
        const ReplaySampler s(prices);
        const double oracle = run_episode(PolicyKind::Oracle, prices, nullptr, cfg, 4, 0, seed).total_reward;
        const double perfect = run_episode(PolicyKind::Perfect, prices, nullptr, cfg, 4, 0, seed).total_reward;
        for (auto kind : {PolicyKind::Deterministic, PolicyKind::MonteCarlo, PolicyKind::DstTree}) {
            CAPTURE(to_string(kind));
            const double v = run_episode(kind, prices, &s, cfg, 4, 0, seed).total_reward;
            CHECK(std::abs(v - oracle) <= 1e-6);
        }
        CHECK(perfect >= oracle - 1e-6);
    }
}

TEST_CASE("perfect information bounds every policy") {
    auto cfg = small_config();
    cfg.battery.c_deg = 0.5;
    const auto s = ar_sampler();
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const Matrix prices = random_series(100 + seed, 40);
        const double perfect = run_episode(PolicyKind::Perfect, prices, nullptr, cfg, 4, 0, seed).total_reward;
        for (auto kind : all_policies()) {
            CAPTURE(to_string(kind));
            CHECK(run_episode(kind, prices, &s, cfg, 4, 0, seed).total_reward <= perfect + 1e-6);
        }
    }
}

TEST_CASE("perfect run realizes the whole-episode optimum") {
    auto cfg = small_config();
    cfg.optimizer.discount = 0.9;  // ignored by the perfect controller
    const Matrix prices = random_series(9, 36);
    const auto p = run_episode(PolicyKind::Perfect, prices, nullptr, cfg, 4, 5, 0);
    std::vector<double> episode;
    for (std::size_t t = 4; t < 24; ++t) episode.push_back(prices(t, 0));
    const auto whole = plan_path(episode, cfg.battery, {}, 0.0);
    CHECK(p.total_reward == doctest::Approx(whole.objective).epsilon(1e-9));
}

TEST_CASE("episode accounting replays through the environment") {
    auto cfg = small_config();
    cfg.optimizer.terminal_value_rate = 30.0;
    cfg.initial_soc = 0.4;
    const Matrix prices = random_series(21, 44);
    const auto s = ar_sampler();
    const auto r = run_episode(PolicyKind::DstTree, prices, &s, cfg, 4, 0, 5);
    double soc = cfg.initial_soc;
    double total = 0.0;
    for (std::size_t e = 0; e < r.epochs.size(); ++e) {
        const auto& log = r.epochs[e];
        CHECK(log.start_hour == 4 + 4 * e);
        REQUIRE(log.plan.size() == 4);
        CHECK_FALSE(validate_plan(soc, log.plan, cfg.battery).has_value());
        double reward = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(log.prices[j] == prices(log.start_hour + j, 0));
            const auto st = step({soc, {log.prices[j]}, log.start_hour + j}, log.plan[j], cfg.battery);
            soc = st.next_soc;
            reward += st.reward;
        }
        if (e + 1 == r.epochs.size()) reward += 30.0 * soc;
        CHECK(log.reward == doctest::Approx(reward).epsilon(1e-12));
        total += reward;
    }
    CHECK(r.final_soc == soc);
    CHECK(r.total_reward == doctest::Approx(total).epsilon(1e-12));
}

TEST_CASE("episode input errors") {
    auto cfg = small_config();
    const Matrix prices = random_series(2, 30);
    const auto s = ar_sampler();
    CHECK_THROWS_AS(run_episode(PolicyKind::DstTree, prices, nullptr, cfg, 4, 0, 0), InvalidInput);
    CHECK_THROWS_AS(run_episode(PolicyKind::Oracle, prices, nullptr, cfg, 4, 50, 0), InvalidInput);
    CHECK_THROWS_AS(run_episode(PolicyKind::Oracle, Matrix(30, 2, 1.0), nullptr, cfg, 4, 0, 0), InvalidInput);
    cfg.initial_soc = 2.0;
    CHECK_THROWS_AS(run_episode(PolicyKind::Oracle, prices, nullptr, cfg, 4, 0, 0), InvalidInput);
}

TEST_CASE("episodes are deterministic and parallel runs match serial ones") {
    auto cfg = small_config();
    const Matrix prices = random_series(5, 60);
    const auto s = ar_sampler();
    const auto ar = ar_sampler();
    std::vector<EpisodeJob> jobs;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        for (auto kind : all_policies()) jobs.push_back({"m" + std::to_string(seed), kind, 4, 6, seed});
    }
    const auto serial = run_jobs(jobs, prices, &s, &ar, cfg, 1);
    const auto parallel = run_jobs(jobs, prices, &s, &ar, cfg, 4);
    REQUIRE(serial.size() == jobs.size());
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        CHECK(serial[i].kind == jobs[i].kind);
        CHECK(episode_to_json(serial[i]) == episode_to_json(parallel[i]));
    }
    const auto again = run_episode(PolicyKind::MonteCarlo, prices, &s, cfg, 4, 6, 1);
    CHECK(episode_to_json(again) == episode_to_json(serial[6 + 3]));
}

TEST_CASE("episode log JSON") {
    auto cfg = small_config();
    const Matrix prices = random_series(8, 24);
    const auto r = run_episode(PolicyKind::Oracle, prices, nullptr, cfg, 4, 2, 0);
    const auto j = nlohmann::json::parse(episode_to_json(r));
    CHECK(j["policy"] == "oracle_mpc");
    CHECK(j["total_reward"].get<double>() == r.total_reward);
    REQUIRE(j["epochs"].size() == 2);
    CHECK(j["epochs"][1]["start_hour"] == 8);
    CHECK(j["epochs"][0]["plan"].size() == 4);
    CHECK(j["epochs"][0]["plan"][0].size() == 2);
    CHECK_FALSE(j["epochs"][0].contains("seconds"));
}

TEST_CASE("aggregate report") {
    std::map<std::string, std::map<PolicyKind, EpisodeResult>> res;
    res["2024-01"][PolicyKind::Perfect].total_reward = 10.0;
    res["2024-02"][PolicyKind::Perfect].total_reward = 20.0;
    res["2024-01"][PolicyKind::DstTree].total_reward = -1.005;
    res["2024-02"][PolicyKind::DstTree].total_reward = 4.0;
    CHECK(aggregate_report({"2024-01", "2024-02"}, {PolicyKind::Perfect}, res) ==
          "month,perfect_mpc\n2024-01,10.00\n2024-02,20.00\nSum,30.00\nAverage,15.00\n");
    const auto one = aggregate_report({"2024-02"}, {PolicyKind::Perfect, PolicyKind::DstTree}, res);
    CHECK(one == "month,perfect_mpc,dst_smpc\n2024-02,20.00,4.00\nSum,20.00,4.00\nAverage,20.00,4.00\n");
    CHECK_THROWS(aggregate_report({"2024-03"}, {PolicyKind::Perfect}, res));
}
