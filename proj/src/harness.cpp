#include "dst/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "dst/common.hpp"

namespace dst {

namespace {

const std::vector<std::pair<PolicyKind, const char*>> kPolicyNames = {
    {PolicyKind::Perfect, "perfect_mpc"},
    {PolicyKind::Oracle, "oracle_mpc"},
    {PolicyKind::Deterministic, "deterministic_mpc"},
    {PolicyKind::MonteCarlo, "mc_smpc"},
    {PolicyKind::DstTree, "dst_smpc"},
    {PolicyKind::ArTree, "ar_tree_smpc"},
};

Solution solve_or_throw(const TreeProgram& prog, const OptimizerConfig& cfg) {
    const Solution sol = solve_program(prog, cfg);
    if (sol.status != SolveStatus::Optimal) {
        throw SolverFailure(std::string("planning program is ") + to_string(sol.status));
    }
    return sol;
}

std::vector<double> column(const Matrix& m, std::size_t first, std::size_t count, std::size_t col) {
    std::vector<double> out(count);
    for (std::size_t j = 0; j < count; ++j) {
        out[j] = m(first + j, col);
    }
    return out;
}

std::size_t power(std::size_t base, std::size_t exp) {
    std::size_t r = 1;
    for (std::size_t i = 0; i < exp; ++i) {
        r *= base;
    }
    return r;
}

}  // namespace

std::string to_string(PolicyKind kind) {
    for (const auto& [k, name] : kPolicyNames) {
        if (k == kind) {
            return name;
        }
    }
    return "unknown";
}

PolicyKind parse_policy(const std::string& name) {
    for (const auto& [k, n] : kPolicyNames) {
        if (name == n) {
            return k;
        }
    }
    throw InvalidInput("unknown policy '" + name + "'");
}

const std::vector<PolicyKind>& all_policies() {
    static const std::vector<PolicyKind> all = [] {
        std::vector<PolicyKind> v;
        for (const auto& entry : kPolicyNames) {
            v.push_back(entry.first);
        }
        return v;
    }();
    return all;
}

void HarnessConfig::validate() const {
    tree.validate();
    battery.validate(true);
    optimizer.validate();
    if (initial_soc < battery.soc_min - kSocTolerance || initial_soc > battery.soc_max + kSocTolerance) {
        throw InvalidInput("initial soc outside [soc_min, soc_max]");
    }
    if (trading_dim >= tree.series_dim) {
        throw InvalidInput("trading dimension out of range");
    }
    if (tree_workers == 0) {
        throw InvalidInput("tree_workers must be at least 1");
    }
}

Plan plan_path(const std::vector<double>& prices, const BatteryParams& battery,
               const OptimizerConfig& cfg, double soc) {
    Plan plan;
    if (prices.empty()) {
        return plan;
    }
    const TreeProgram prog = formulate_path_lp(prices, battery, cfg, soc);
    const Solution sol = solve_or_throw(prog, cfg);
    plan.actions = extract_policy(prog, sol).first_stage();
    plan.objective = sol.objective;
    return plan;
}

Plan plan_mc_smpc(const std::vector<std::vector<double>>& scenarios, const BatteryParams& battery,
                  const OptimizerConfig& cfg, double soc) {
    Plan plan;
    const TreeProgram prog = formulate_scenario_average_lp(scenarios, battery, cfg, soc);
    if (prog.hours == 0) {
        return plan;
    }
    const Solution sol = solve_or_throw(prog, cfg);
    plan.actions = extract_policy(prog, sol).first_stage();
    plan.objective = sol.objective;
    return plan;
}

Plan plan_dst_smpc(const ScenarioTree& tree, const BatteryParams& battery,
                   const OptimizerConfig& cfg, double soc, std::size_t trading_dim) {
    const TreeProgram prog = formulate_tree_lp(tree, battery, cfg, soc, trading_dim);
    const Solution sol = solve_or_throw(prog, cfg);
    Plan plan;
    plan.actions = extract_policy(prog, sol).first_stage();
    plan.objective = sol.objective;
    return plan;
}

std::vector<double> mean_path(const std::vector<std::vector<double>>& paths) {
    if (paths.empty()) {
        throw InvalidInput("mean_path: no paths");
    }
    std::vector<double> mean(paths.front().size(), 0.0);
    for (std::size_t k = 0; k < paths.size(); ++k) {
        if (paths[k].size() != mean.size()) {
            throw InvalidInput("mean_path: paths differ in length");
        }
        const double n = static_cast<double>(k + 1);
        for (std::size_t j = 0; j < mean.size(); ++j) {
            mean[j] += (paths[k][j] - mean[j]) / n;
        }
    }
    return mean;
}

std::vector<std::vector<double>> forecast_paths(const TrajectorySampler& sampler, const Matrix& history,
                                                std::size_t count, std::size_t h,
                                                std::size_t stages, std::size_t trading_dim,
                                                std::uint64_t seed) {
    if (history.rows() < h) {
        throw InvalidInput("forecast_paths: history shorter than one block");
    }
    const std::vector<double> current = column(history, history.rows() - h, h, trading_dim);
    const auto sampled = rollout_trajectories(sampler, history, count, h, stages, seed);
    std::vector<std::vector<double>> out;
    out.reserve(count);
    for (const auto& p : sampled) {
        auto path = current;
        const auto tail = column(p, 0, p.rows(), trading_dim);
        path.insert(path.end(), tail.begin(), tail.end());
        out.push_back(std::move(path));
    }
    return out;
}

std::size_t max_epochs(std::size_t series_rows, std::size_t start, const TreeConfig& tree) {
    const std::size_t H = tree.stage_horizon;
    const std::size_t need = start + tree.depth * H;
    if (series_rows < need + H) {
        return 0;
    }
    return (series_rows - need) / H;
}

EpisodeResult run_episode(PolicyKind kind, const Matrix& prices, const TrajectorySampler* sampler,
                          const HarnessConfig& cfg, std::size_t start, std::size_t epochs,
                          std::uint64_t seed) {
    cfg.validate();
    if (prices.cols() != cfg.tree.series_dim) {
        throw InvalidInput("price series has " + std::to_string(prices.cols()) + " columns, expected " +
                           std::to_string(cfg.tree.series_dim));
    }
    const bool needs_sampler = kind != PolicyKind::Perfect && kind != PolicyKind::Oracle;
    if (needs_sampler && sampler == nullptr) {
        throw InvalidInput(to_string(kind) + " needs a sampler");
    }
    const std::size_t H = cfg.tree.stage_horizon;
    const std::size_t depth = cfg.tree.depth;
    const std::size_t fit = max_epochs(prices.rows(), start, cfg.tree);
    if (epochs == 0) {
        epochs = fit;
    }
    if (epochs == 0 || epochs > fit) {
        throw InvalidInput("episode of " + std::to_string(epochs) + " epochs from hour " +
                           std::to_string(start) + " needs more than " + std::to_string(prices.rows()) +
                           " hours of prices");
    }
    const std::size_t td = cfg.trading_dim;
    const std::size_t mean_samples = cfg.mean_samples > 0 ? cfg.mean_samples : cfg.tree.samples_per_node;
    const std::size_t mc_count =
        cfg.mc_trajectories > 0 ? cfg.mc_trajectories : power(cfg.tree.keep_children, depth);

    EpisodeResult result;
    result.kind = kind;
    double soc = cfg.initial_soc;

    Plan perfect;
    if (kind == PolicyKind::Perfect) {
        // undiscounted, over the whole episode: the full-information bound
        OptimizerConfig whole = cfg.optimizer;
        whole.discount = 1.0;
        perfect = plan_path(column(prices, start, epochs * H, td), cfg.battery, whole, soc);
    }

    for (std::size_t e = 0; e < epochs; ++e) {
        const auto t0 = std::chrono::steady_clock::now();
        const std::size_t t = start + e * H;
        const std::uint64_t epoch_seed = mix_seed(seed, e);
        const Matrix history = prices.slice_rows(0, t + H);

        Plan plan;
        switch (kind) {
            case PolicyKind::Perfect:
                plan.actions.assign(perfect.actions.begin() + static_cast<std::ptrdiff_t>(e * H),
                                    perfect.actions.begin() + static_cast<std::ptrdiff_t>((e + 1) * H));
                plan.objective = perfect.objective;
                break;
            case PolicyKind::Oracle:
                plan = plan_path(column(prices, t, (depth + 1) * H, td), cfg.battery, cfg.optimizer, soc);
                break;
            case PolicyKind::Deterministic: {
                const auto paths = forecast_paths(*sampler, history, mean_samples, H, depth, td, epoch_seed);
                plan = plan_path(mean_path(paths), cfg.battery, cfg.optimizer, soc);
                break;
            }
            case PolicyKind::MonteCarlo: {
                const auto paths = forecast_paths(*sampler, history, mc_count, H, depth, td, epoch_seed);
                plan = plan_mc_smpc(paths, cfg.battery, cfg.optimizer, soc);
                break;
            }
            case PolicyKind::DstTree:
            case PolicyKind::ArTree: {
                TreeConfig tc = cfg.tree;
                tc.master_seed = epoch_seed;
                const ScenarioTree tree = build_tree(*sampler, history, tc, BuildOptions{cfg.tree_workers});
                plan = plan_dst_smpc(tree, cfg.battery, cfg.optimizer, soc, td);
                break;
            }
        }
        plan.actions.resize(H);

        EpochLog log;
        log.epoch = e;
        log.start_hour = t;
        log.plan = plan.actions;
        log.plan_objective = plan.objective;
        log.prices = column(prices, t, H, td);
        for (std::size_t j = 0; j < H; ++j) {
            Observation obs{soc, {}, t + j};
            const auto row = prices.row(t + j);
            obs.prices.assign(row.begin(), row.end());
            try {
                const StepResult r = step(obs, plan.actions[j], cfg.battery, td);
                soc = r.next_soc;
                log.reward += r.reward;
            } catch (const InfeasibleAction& err) {
                throw InfeasibleAction(to_string(kind) + " epoch " + std::to_string(e) + ": " + err.what());
            }
        }
        if (e + 1 == epochs) {
            log.reward += cfg.optimizer.terminal_value_rate * soc;
        }
        log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.total_reward += log.reward;
        result.epochs.push_back(std::move(log));
    }
    result.final_soc = soc;
    return result;
}

std::vector<EpisodeResult> run_jobs(const std::vector<EpisodeJob>& jobs, const Matrix& prices,
                                    const TrajectorySampler* sampler,
                                    const TrajectorySampler* ar_sampler, const HarnessConfig& cfg,
                                    std::size_t workers) {
    std::vector<EpisodeResult> results(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) {
                return;
            }
            const EpisodeJob& job = jobs[i];
            try {
                const TrajectorySampler* s = job.kind == PolicyKind::ArTree ? ar_sampler : sampler;
                std::unique_ptr<TrajectorySampler> own;
                if (s != nullptr && !s->thread_safe() && workers > 1) {
                    own = s->clone();
                    s = own.get();
                }
                results[i] = run_episode(job.kind, prices, s, cfg, job.start, job.epochs, job.seed);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };

    workers = std::max<std::size_t>(1, std::min(workers, jobs.size()));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    for (const auto& err : errors) {
        if (err) {
            std::rethrow_exception(err);
        }
    }
    return results;
}

std::string episode_to_json(const EpisodeResult& result) {
    auto num = [](double v) { return format_double(v, 17, 'g'); };
    std::ostringstream out;
    out << "{\"policy\":\"" << to_string(result.kind) << "\",\"total_reward\":" << num(result.total_reward)
        << ",\"final_soc\":" << num(result.final_soc) << ",\"epochs\":[";
    for (std::size_t e = 0; e < result.epochs.size(); ++e) {
        const auto& log = result.epochs[e];
        out << (e ? "," : "") << "\n{\"epoch\":" << log.epoch << ",\"start_hour\":" << log.start_hour
            << ",\"prices\":[";
        for (std::size_t j = 0; j < log.prices.size(); ++j) {
            out << (j ? "," : "") << num(log.prices[j]);
        }
        out << "],\"plan\":[";
        for (std::size_t j = 0; j < log.plan.size(); ++j) {
            out << (j ? "," : "") << "[" << num(log.plan[j].p_c) << "," << num(log.plan[j].p_d) << "]";
        }
        out << "],\"reward\":" << num(log.reward) << "}";
    }
    out << "]}\n";
    return out.str();
}

std::string aggregate_report(const std::vector<std::string>& labels,
                             const std::vector<PolicyKind>& policies,
                             const std::map<std::string, std::map<PolicyKind, EpisodeResult>>& results) {
    std::ostringstream out;
    out << "month";
    for (auto p : policies) {
        out << "," << to_string(p);
    }
    out << "\n";
    std::vector<double> sums(policies.size(), 0.0);
    for (const auto& label : labels) {
        const auto& row = results.at(label);
        out << label;
        for (std::size_t k = 0; k < policies.size(); ++k) {
            const double v = row.at(policies[k]).total_reward;
            sums[k] += v;
            out << "," << format_double(v, 2);
        }
        out << "\n";
    }
    out << "Sum";
    for (double s : sums) {
        out << "," << format_double(s, 2);
    }
    out << "\nAverage";
    for (double s : sums) {
        out << "," << format_double(labels.empty() ? 0.0 : s / static_cast<double>(labels.size()), 2);
    }
    out << "\n";
    return out.str();
}

}  // namespace dst
