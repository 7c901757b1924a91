// Acceptance suite: one PASS/FAIL line per criterion, with timings.
// Exit status is non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dst/external_sampler.hpp"
#include "dst/harness.hpp"
#include "dst/scenario_tree.hpp"
#include "dst/synthetic_samplers.hpp"
#include "dst/tree_program.hpp"
#include "oracles.hpp"

using namespace dst;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) {
            detail = what;
        }
        pass = pass && ok;
    }
};

struct Criterion {
    std::string tag;
    std::string name;
    double limit_seconds;
    std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---------------------------------------------------------------------------

std::unique_ptr<TrajectorySampler> random_sampler(std::mt19937_64& rng, std::size_t d) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    switch (rng() % 3) {
        case 0: {
            GaussianARParams p{Matrix(d, d, 0.0), std::vector<double>(d), std::vector<double>(d)};
            for (std::size_t i = 0; i < d; ++i) {
                p.transition(i, i) = 0.9 * u(rng);
                p.intercept[i] = 50.0 * u(rng);
                p.noise_scale[i] = 10.0 * u(rng);
            }
            return std::make_unique<GaussianARSampler>(p);
        }
        case 1: {
            const std::size_t r = 1 + rng() % 4;
            RegimeMixtureParams p;
            double total = 0.0;
            for (std::size_t j = 0; j < r; ++j) {
                p.weights.push_back(0.1 + u(rng));
                total += p.weights.back();
                std::vector<double> drift(d);
                for (auto& v : drift) v = 6.0 * u(rng) - 3.0;
                p.drifts.push_back(drift);
            }
            for (auto& w : p.weights) w /= total;
            p.noise_scale = rng() % 2 ? 0.0 : 2.0 * u(rng);
            return std::make_unique<RegimeMixtureSampler>(p);
        }
        default: {
            const std::size_t period = 2 + rng() % 6;
            SeasonalRegimeParams p{{0.3, 0.7}, {Matrix(period, d), Matrix(period, d)}, 3.0 * u(rng)};
            for (auto& prof : p.profiles) {
                for (auto& v : prof.data()) v = 100.0 * u(rng);
            }
            return std::make_unique<SeasonalRegimeSampler>(p);
        }
    }
}

Outcome tree_invariants() {
    Outcome out;
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 200 && out.pass; ++trial) {
        const std::size_t d = 1 + rng() % 3;
        const auto sampler = random_sampler(rng, d);
        TreeConfig cfg;
        cfg.depth = 1 + rng() % 3;
        cfg.stage_horizon = 1 + rng() % 6;
        cfg.samples_per_node = 8 + rng() % 57;
        cfg.clusters = 1 + rng() % 5;
        cfg.keep_children = 1 + rng() % 3;
        cfg.series_dim = d;
        cfg.master_seed = rng();
        Matrix hist(cfg.stage_horizon + rng() % 4, d, 0.0);
        for (auto& v : hist.data()) v = 40.0 + static_cast<double>(rng() % 200) / 10.0;

        const ScenarioTree tree = build_tree(*sampler, hist, cfg);
        const std::string id = "build " + std::to_string(trial);
        for (const auto& n : tree.nodes()) {
            if (n.children.empty()) continue;
            double s = 0.0;
            for (auto c : n.children) s += tree.node(c).branch_prob;
            out.require(std::abs(s - 1.0) <= 1e-9, id + ": branch probabilities of node " + std::to_string(n.id) +
                                                       " sum to " + fmt("%.17g", s));
        }
        for (std::size_t t = 0; t <= tree.max_stage(); ++t) {
            double s = 0.0;
            for (const auto& [nid, p] : stage_probabilities(tree, t)) s += p;
            out.require(std::abs(s - 1.0) <= 1e-9, id + ": stage " + std::to_string(t) + " path probabilities sum to " +
                                                       fmt("%.17g", s));
        }
        out.require(build_tree(*sampler, hist, cfg) == tree, id + ": rebuild differs");
        const std::size_t workers = 2 + rng() % 7;
        out.require(build_tree(*sampler, hist, cfg, BuildOptions{workers}) == tree,
                    id + ": " + std::to_string(workers) + " workers differ from 1");
    }
    if (out.pass) out.detail = "200 builds, sums within 1e-9, rebuilds and 2..8 workers bit-identical";
    return out;
}

// ---------------------------------------------------------------------------

Outcome mixture_recovery() {
    RegimeMixtureSampler s({{0.7, 0.3}, {{3.0}, {-3.0}}, 0.5});
    TreeConfig cfg{1, 4, 1000, 2, 2, 1, 0};
    const Matrix hist(4, 1, 50.0);
    int hits = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        cfg.master_seed = seed;
        const auto tree = build_tree(s, hist, cfg);
        if (tree.size() != 3) continue;
        const auto& a = tree.node(1);
        const auto& b = tree.node(2);
        const double up = a.forecast(3, 0) > b.forecast(3, 0) ? a.branch_prob : b.branch_prob;
        worst = std::max(worst, std::abs(up - 0.7));
        if (std::abs(up - 0.7) <= 0.05) ++hits;
    }
    Outcome out;
    out.require(hits >= 18, "");
    out.detail = std::to_string(hits) + "/20 seeds within 0.05 of 0.7 (need 18), worst error " + fmt("%.4f", worst);
    return out;
}

// ---------------------------------------------------------------------------

Matrix random_block(std::mt19937_64& rng, std::size_t h) {
    std::uniform_real_distribution<double> u(0.0, 60.0);
    Matrix m(h, 1);
    for (std::size_t j = 0; j < h; ++j) m(j, 0) = u(rng);
    return m;
}

ScenarioTree random_tree(std::mt19937_64& rng, std::size_t h) {
    std::uniform_real_distribution<double> u(0.1, 0.9);
    const std::size_t depth = 1 + rng() % 2;
    ScenarioTree tree(TreeConfig{depth, h, 8, 2, 2, 1, 0}, random_block(rng, h));
    std::vector<NodeId> frontier{0};
    for (std::size_t stage = 0; stage < depth; ++stage) {
        std::vector<NodeId> next;
        for (NodeId p : frontier) {
            const bool two = rng() % 2;
            const double w = two ? u(rng) : 1.0;
            next.push_back(tree.add_child(p, random_block(rng, h), w));
            if (two) next.push_back(tree.add_child(p, random_block(rng, h), 1.0 - w));
        }
        frontier = next;
    }
    return tree;
}

BatteryParams random_battery(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    BatteryParams b;
    b.capacity = 1.0 + u(rng);
    b.soc_min = 0.1 * u(rng);
    b.soc_max = b.capacity - 0.1 * u(rng);
    b.p_max = 0.3 + 0.5 * u(rng);
    b.eta_c = 0.85 + 0.15 * u(rng);
    b.eta_d = 0.85 + 0.15 * u(rng);
    b.c_deg = 2.0 * u(rng);
    return b;
}

Outcome solver_cross_check() {
    Outcome out;
    std::mt19937_64 rng(77);
    double worst_c = 0.0, worst_rel = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t h = 1 + rng() % 4;
        const auto tree = random_tree(rng, h);
        const auto b = random_battery(rng);
        OptimizerConfig cfg;
        cfg.discount = trial % 2 ? 1.0 : 0.97;
        const double soc0 = 0.5 * (b.soc_min + b.soc_max);
        const auto lp = solve_program(formulate_tree_lp(tree, b, cfg, soc0), cfg);
        const std::string id = "tree " + std::to_string(trial);
        out.require(lp.status == SolveStatus::Optimal, id + ": LP not optimal");
        if (lp.status != SolveStatus::Optimal) continue;
        double prev = std::numeric_limits<double>::infinity();
        for (std::size_t pts : {11u, 41u, 161u, 641u}) {
            const auto dp = solve_tree_dp(tree, b, cfg, soc0, pts, 21);
            const double gap = lp.objective - dp.objective;
            out.require(gap >= -1e-9, id + ": DP above LP by " + fmt("%.3g", -gap));
            out.require(gap <= prev + 1e-9, id + ": gap grew on a finer grid");
            worst_c = std::max(worst_c, gap / ((b.soc_max - b.soc_min) / static_cast<double>(pts - 1)));
            prev = gap;
        }
        const double tol = 1e-3 * std::abs(lp.objective) + 1e-6;
        worst_rel = std::max(worst_rel, prev / tol);
        out.require(prev <= tol, id + ": final gap " + fmt("%.3g", prev) + " above " + fmt("%.3g", tol));
    }

    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst_lp = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        LinearProgram lp;
        const int n = 1 + static_cast<int>(rng() % 5);
        const int m = 1 + static_cast<int>(rng() % 5);
        std::vector<double> x0(n);
        for (int j = 0; j < n; ++j) {
            x0[j] = 2.0 * u(rng);
            lp.add_variable(x0[j] - 1.0 - std::abs(u(rng)), x0[j] + 1.0 + std::abs(u(rng)), 3.0 * u(rng));
        }
        for (int i = 0; i < m; ++i) {
            std::vector<LinearProgram::Term> terms;
            double at = 0.0;
            for (int j = 0; j < n; ++j) {
                const double a = std::round(400.0 * u(rng)) / 100.0;
                terms.push_back({static_cast<std::size_t>(j), a});
                at += a * x0[j];
            }
            const bool le = i % 2 == 0;
            lp.add_row(terms, le ? RowSense::LessEqual : RowSense::GreaterEqual,
                       le ? at + std::abs(u(rng)) : at - std::abs(u(rng)));
        }
        const auto brute = oracle::vertex_enumeration(lp);
        const auto s = solve_lp(lp);
        const bool ok = brute && s.status == SolveStatus::Optimal;
        out.require(ok, "random LP " + std::to_string(trial) + " not solved");
        if (ok) {
            worst_lp = std::max(worst_lp, std::abs(s.objective - *brute));
            out.require(std::abs(s.objective - *brute) <= 1e-8, "random LP " + std::to_string(trial) + " differs");
        }
    }
    if (out.pass) {
        out.detail = "DP gap C = " + fmt("%.2f", worst_c) + " per unit grid spacing, worst final gap " +
                     fmt("%.2f", worst_rel) + " of tolerance; LP vs vertices max diff " + fmt("%.1e", worst_lp);
    }
    return out;
}

// ---------------------------------------------------------------------------

Outcome exact_instance() {
    BatteryParams b;
    b.p_max = 1.0;
    b.eta_c = 1.0;
    b.eta_d = 1.0;
    b.c_deg = 0.0;
    const auto plan = plan_path({10.0, 30.0}, b, {}, 0.0);
    const auto brute = oracle::enumerate_battery_plans({10.0, 30.0}, 0.0, b, 4);
    Outcome out;
    out.require(std::abs(plan.objective - 20.0) <= 1e-9, "objective " + fmt("%.12g", plan.objective));
    out.require(std::abs(brute.reward - 20.0) <= 1e-12, "enumeration oracle gives " + fmt("%.12g", brute.reward));
    const bool shape = plan.actions.size() == 2 && std::abs(plan.actions[0].p_c - 1) <= 1e-9 &&
                       std::abs(plan.actions[0].p_d) <= 1e-9 && std::abs(plan.actions[1].p_c) <= 1e-9 &&
                       std::abs(plan.actions[1].p_d - 1) <= 1e-9;
    out.require(shape, "plan is not [(1,0),(0,1)]");
    if (out.pass) out.detail = "objective 20, plan [(1,0),(0,1)], enumeration agrees";
    return out;
}

// ---------------------------------------------------------------------------

Matrix random_series(std::uint64_t seed, std::size_t rows) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 80.0);
    Matrix m(rows, 1);
    for (auto& v : m.data()) v = u(rng);
    return m;
}

Outcome degenerate_equivalence() {
    Outcome out;
    HarnessConfig cfg;
    cfg.tree = TreeConfig{2, 4, 32, 3, 2, 1, 0};
    const GaussianARSampler ar({Matrix(1, 1, 0.5), {20.0}, {10.0}});
    double worst = 0.0, worst_bound = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Matrix prices = random_series(seed, 60);
        const ReplaySampler replay(prices);
        cfg.battery.c_deg = 0.1 * static_cast<double>(seed % 5);
        std::map<PolicyKind, double> tot;
        for (auto k : all_policies()) {
            const TrajectorySampler* s = k == PolicyKind::ArTree ? static_cast<const TrajectorySampler*>(&ar) : &replay;
            tot[k] = run_episode(k, prices, s, cfg, 4, 0, seed).total_reward;
        }
        for (auto k : {PolicyKind::DstTree, PolicyKind::MonteCarlo, PolicyKind::Deterministic}) {
            const double diff = std::abs(tot[k] - tot[PolicyKind::Oracle]);
            worst = std::max(worst, diff);
            out.require(diff <= 1e-6, "seed " + std::to_string(seed) + ": " + to_string(k) + " differs from oracle by " +
                                          fmt("%.3g", diff));
        }
        for (const auto& [k, v] : tot) {
            worst_bound = std::max(worst_bound, v - tot[PolicyKind::Perfect]);
            out.require(tot[PolicyKind::Perfect] >= v - 1e-6, "seed " + std::to_string(seed) + ": " + to_string(k) +
                                                                  " beats perfect");
        }
    }
    if (out.pass) {
        out.detail = "20 episodes, max |policy - oracle| " + fmt("%.1e", worst) + ", max excess over perfect " +
                     fmt("%.1e", std::max(0.0, worst_bound));
    }
    return out;
}

// ---------------------------------------------------------------------------

Outcome mc_mean_equivalence() {
    Outcome out;
    const GaussianARSampler ar({Matrix(1, 1, 0.6), {16.0}, {12.0}});
    std::mt19937_64 rng(5);
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Matrix hist = random_series(100 + seed, 12);
        const auto paths = forecast_paths(ar, hist, 16, 6, 2, 0, seed);
        const auto b = random_battery(rng);
        const double soc = b.soc_min + 0.3 * (b.soc_max - b.soc_min);
        const double mc = plan_mc_smpc(paths, b, {}, soc).objective;
        const double det = plan_path(mean_path(paths), b, {}, soc).objective;
        worst = std::max(worst, std::abs(mc - det));
        out.require(std::abs(mc - det) <= 1e-9, "seed " + std::to_string(seed) + ": difference " +
                                                    fmt("%.3g", std::abs(mc - det)));
    }
    if (out.pass) out.detail = "20 seeds, max objective difference " + fmt("%.1e", worst);
    return out;
}

// ---------------------------------------------------------------------------

// One-sided P(X >= k) for X ~ Binomial(n, 1/2).
double sign_test_p(int k, int n) {
    double p = 0.0;
    for (int i = k; i <= n; ++i) {
        p += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - n * std::log(2.0));
    }
    return p;
}

Outcome bimodal_benchmark() {
    const std::size_t H = 6, depth = 2, epochs = 10;
    const Matrix a = Matrix::from_rows({{40}, {160}, {40}, {40}, {60}, {60}});
    const Matrix b = Matrix::from_rows({{40}, {40}, {160}, {40}, {60}, {60}});
    const SeasonalRegimeSampler truth({{0.5, 0.5}, {a, b}, 3.0});
    const GaussianARSampler ar({Matrix(1, 1, 0.5), {30.0}, {30.0}});
    HarnessConfig cfg;
    cfg.tree = TreeConfig{depth, H, 64, 2, 2, 1, 0};
    cfg.battery.p_max = 0.5;
    cfg.battery.c_deg = 1.0;

    std::map<PolicyKind, double> mean;
    int wins = 0, losses = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Matrix tail = rollout_trajectories(truth, Matrix(H, 1, 50.0), 1, H, epochs + depth + 1,
                                                 mix_seed(seed, 99)).front();
        Matrix prices = a;
        prices.append_rows(tail);
        std::map<PolicyKind, double> tot;
        for (auto k : all_policies()) {
            const TrajectorySampler* s = k == PolicyKind::ArTree ? static_cast<const TrajectorySampler*>(&ar) : &truth;
            tot[k] = run_episode(k, prices, s, cfg, H, epochs, seed).total_reward;
            mean[k] += tot[k] / 50.0;
        }
        const double d = tot[PolicyKind::DstTree] - tot[PolicyKind::Deterministic];
        if (d > 1e-9) ++wins;
        if (d < -1e-9) ++losses;
    }
    const double p = sign_test_p(wins, wins + losses);
    Outcome out;
    out.require(mean[PolicyKind::Perfect] >= mean[PolicyKind::Oracle], "perfect < oracle");
    out.require(mean[PolicyKind::Oracle] >= mean[PolicyKind::DstTree], "oracle < dst");
    out.require(mean[PolicyKind::DstTree] > mean[PolicyKind::Deterministic], "dst <= deterministic");
    out.require(p < 0.01, "sign test p = " + fmt("%.3g", p));
    out.require(mean[PolicyKind::DstTree] >= mean[PolicyKind::ArTree], "dst < ar_tree");
    std::ostringstream d;
    d << "means perfect " << fmt("%.2f", mean[PolicyKind::Perfect]) << ", oracle "
      << fmt("%.2f", mean[PolicyKind::Oracle]) << ", dst " << fmt("%.2f", mean[PolicyKind::DstTree]) << ", mc "
      << fmt("%.2f", mean[PolicyKind::MonteCarlo]) << ", deterministic "
      << fmt("%.2f", mean[PolicyKind::Deterministic]) << ", ar_tree " << fmt("%.2f", mean[PolicyKind::ArTree])
      << "; dst vs deterministic " << wins << " wins / " << losses << " losses, sign test p = " << fmt("%.2g", p);
    out.detail = out.pass ? d.str() : out.detail + "; " + d.str();
    return out;
}

// ---------------------------------------------------------------------------

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string run_command(const std::string& cmd, int& status) {
    std::string out;
    FILE* p = popen(cmd.c_str(), "r");
    if (p == nullptr) {
        status = -1;
        return out;
    }
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
    status = pclose(p);
    return out;
}

Outcome golden_files() {
    const std::string cfg = std::string(SOURCE_DIR) + "/configs/synthetic.json";
    const std::string golden = std::string(SOURCE_DIR) + "/tests/golden/";
    const std::string scratch = std::string(BINARY_DIR) + "/acceptance_golden";
    Outcome out;
    int st = 0;
    const std::string dot =
        run_command(std::string(DSTREE) + " build-tree --config " + cfg + " --seed 7 --format dot 2>/dev/null", st);
    out.require(st == 0, "build-tree failed");
    out.require(dot == read_file(golden + "synthetic_tree.dot"), "DOT export differs from golden");
    run_command(std::string(DSTREE) + " simulate --config " + cfg + " --out " + scratch + " 2>/dev/null", st);
    out.require(st == 0, "simulate failed");
    out.require(read_file(scratch + "/report.csv") == read_file(golden + "synthetic_report.csv"),
                "report CSV differs from golden");
    if (out.pass) out.detail = "tree DOT and report CSV byte-identical to goldens";
    return out;
}

// ---------------------------------------------------------------------------

Outcome protocol_conformance() {
    Outcome out;
    auto endpoint = [](std::vector<std::string> args) {
        ExternalEndpoint ep;
        ep.command = {STUB_FORECASTER};
        ep.command.insert(ep.command.end(), args.begin(), args.end());
        ep.timeout_seconds = 30.0;
        return ep;
    };
    ExternalSampler remote(endpoint({"--mode", "gaussian", "--a", "0.5", "--c", "10", "--sigma", "1"}));
    out.require(remote.remote_name() == "stub_gaussian" && remote.dim() == 1, "handshake");

    auto throws = [&](const char* mode, auto tag) {
        ExternalSampler s(endpoint({"--mode", mode}));
        try {
            s.sample({Matrix(1, 1, 0.0), 2, 3, 1});
        } catch (const decltype(tag)&) {
            return true;
        } catch (...) {
        }
        return false;
    };
    out.require(throws("bad_shape", ProtocolError("")), "shape mismatch not reported as a protocol error");
    out.require(throws("garbage", ProtocolError("")), "garbage not reported as a protocol error");
    out.require(throws("error", RemoteError("")), "remote error not propagated");

    const GaussianARSampler local({Matrix(1, 1, 0.5), {10.0}, {1.0}});
    const std::size_t m = 10000, h = 10;
    const SamplerRequest req{Matrix(1, 1, 0.0), m, h, 2024};
    const auto rb = remote.sample(req);
    const auto lb = local.sample(req);
    double worst = 0.0;
    for (std::size_t t = 0; t < h; ++t) {
        double rs = 0, rq = 0, ls = 0, lq = 0;
        for (std::size_t i = 0; i < m; ++i) {
            const double r = rb.at(i, t, 0), l = lb.at(i, t, 0);
            rs += r;
            rq += r * r;
            ls += l;
            lq += l * l;
        }
        const double rm = rs / m, lm = ls / m;
        const double se = std::sqrt((rq / m - rm * rm) / m + (lq / m - lm * lm) / m);
        worst = std::max(worst, std::abs(rm - lm) / se);
    }
    out.require(worst <= 4.0, "per-step means differ by " + fmt("%.2f", worst) + " standard errors");
    if (out.pass) {
        out.detail = "handshake, shape and error checks ok; per-step means within " + fmt("%.2f", worst) +
                     " standard errors (limit 4)";
    }
    return out;
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {"PRIMARY", "tree invariants", 30.0, tree_invariants},
        {"PRIMARY", "mixture recovery", 10.0, mixture_recovery},
        {"PRIMARY", "solver cross-check", 60.0, solver_cross_check},
        {"PRIMARY", "exact instance", 1.0, exact_instance},
        {"PRIMARY", "degenerate equivalence", 30.0, degenerate_equivalence},
        {"PRIMARY", "mc/mean equivalence", 20.0, mc_mean_equivalence},
        {"PRIMARY", "bimodal benchmark", 300.0, bimodal_benchmark},
        {"PRIMARY", "golden files", 60.0, golden_files},
        {"SECONDARY", "protocol conformance", 60.0, protocol_conformance},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs >= c.limit_seconds) {
            o.detail += "; over the time limit";
            o.pass = false;
        }
        failed += o.pass ? 0 : 1;
        std::printf("%s [%s] %s: %s (%.2f s, limit %.0f s)\n", o.pass ? "PASS" : "FAIL", c.tag.c_str(),
                    c.name.c_str(), o.detail.c_str(), secs, c.limit_seconds);
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
