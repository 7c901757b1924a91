#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dst/battery.hpp"
#include "dst/sampler.hpp"
#include "dst/scenario_tree.hpp"
#include "dst/tree_program.hpp"

namespace dst {

enum class PolicyKind {
    Perfect,        // whole-episode LP on realized prices
    Oracle,         // realized prices over the planning horizon
    Deterministic,  // mean forecast
    MonteCarlo,     // open-loop scenario average
    DstTree,        // scenario tree from the main sampler
    ArTree,         // scenario tree from the Gaussian-AR sampler
};

/// perfect_mpc, oracle_mpc, deterministic_mpc, mc_smpc, dst_smpc, ar_tree_smpc.
std::string to_string(PolicyKind kind);
/// Throws InvalidInput on an unknown name.
PolicyKind parse_policy(const std::string& name);
const std::vector<PolicyKind>& all_policies();

struct HarnessConfig {
    TreeConfig tree;
    BatteryParams battery;
    OptimizerConfig optimizer;
    double initial_soc = 0.0;
    std::size_t trading_dim = 0;
    std::size_t mean_samples = 0;     // deterministic forecast; 0: tree.samples_per_node
    std::size_t mc_trajectories = 0;  // 0: keep_children^depth
    std::size_t tree_workers = 1;

    void validate() const;

    friend bool operator==(const HarnessConfig&, const HarnessConfig&) = default;
};

/// A planned action sequence and the objective of the program behind it.
struct Plan {
    std::vector<HourlyAction> actions;
    double objective = 0.0;
};

/// Single-path program on known or forecast prices (perfect, oracle and
/// deterministic controllers). Empty prices give an empty plan.
Plan plan_path(const std::vector<double>& prices, const BatteryParams& battery,
               const OptimizerConfig& cfg, double soc);

/// One action sequence maximizing the average reward over the scenarios.
Plan plan_mc_smpc(const std::vector<std::vector<double>>& scenarios, const BatteryParams& battery,
                  const OptimizerConfig& cfg, double soc);

/// Tree program; returns the root node's actions.
Plan plan_dst_smpc(const ScenarioTree& tree, const BatteryParams& battery,
                   const OptimizerConfig& cfg, double soc, std::size_t trading_dim = 0);

/// Hour-wise mean of equally long paths.
std::vector<double> mean_path(const std::vector<std::vector<double>>& paths);

/// Price paths over the planning horizon seen at one epoch: the realized
/// current block followed by `stages` sampled blocks, trading column only.
std::vector<std::vector<double>> forecast_paths(const TrajectorySampler& sampler, const Matrix& history,
                                                std::size_t count, std::size_t h,
                                                std::size_t stages, std::size_t trading_dim,
                                                std::uint64_t seed);

struct EpochLog {
    std::size_t epoch = 0;
    std::size_t start_hour = 0;
    std::vector<double> prices;  // realized, trading column
    std::vector<HourlyAction> plan;
    double reward = 0.0;
    double plan_objective = 0.0;
    double seconds = 0.0;
};

struct EpisodeResult {
    PolicyKind kind = PolicyKind::Perfect;
    double total_reward = 0.0;
    std::vector<EpochLog> epochs;
    double final_soc = 0.0;
};

/// Number of epochs of stage_horizon hours that fit after `start` while
/// leaving depth * stage_horizon hours of lookahead.
std::size_t max_epochs(std::size_t series_rows, std::size_t start, const TreeConfig& tree);

/// Closed-loop rolling-horizon episode.
///
/// Epoch e starts at hour t = start + e H. The controller sees prices[0,
/// t + H) (the current block is known) and plans (depth + 1) H hours; the
/// first H actions are applied against realized prices. Leftover energy
/// after the last epoch is credited at terminal_value_rate and booked in
/// that epoch. `sampler` may be null for perfect and oracle runs. `epochs`
/// 0 means max_epochs().
EpisodeResult run_episode(PolicyKind kind, const Matrix& prices, const TrajectorySampler* sampler,
                          const HarnessConfig& cfg, std::size_t start, std::size_t epochs,
                          std::uint64_t seed);

struct EpisodeJob {
    std::string label;  // report row, e.g. a month
    PolicyKind kind = PolicyKind::Perfect;
    std::size_t start = 0;
    std::size_t epochs = 0;
    std::uint64_t seed = 0;
};

/// Runs jobs on up to `workers` threads. `sampler` feeds deterministic,
/// mc and dst runs; `ar_sampler` feeds ar_tree runs. Samplers that are not
/// thread safe are cloned per job. Results come back in job order.
std::vector<EpisodeResult> run_jobs(const std::vector<EpisodeJob>& jobs, const Matrix& prices,
                                    const TrajectorySampler* sampler,
                                    const TrajectorySampler* ar_sampler, const HarnessConfig& cfg,
                                    std::size_t workers);

/// {"policy", "total_reward", "final_soc", "epochs": [{epoch, start_hour,
/// prices, plan, reward}]}. Wall-clock times are left out.
std::string episode_to_json(const EpisodeResult& result);

/// CSV with one row per label, one column per policy, then Sum and
/// Average rows; two decimals.
std::string aggregate_report(const std::vector<std::string>& labels,
                             const std::vector<PolicyKind>& policies,
                             const std::map<std::string, std::map<PolicyKind, EpisodeResult>>& results);

}  // namespace dst
