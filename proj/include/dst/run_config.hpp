#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dst/harness.hpp"
#include "dst/price_data.hpp"
#include "json.hpp"

namespace dst {

/// A sampler by kind plus its JSON parameters.
///
///   gaussian_ar      {transition, intercept, noise_scale}
///   fit_ar           {}  per-column AR(1) fitted on the warm-up history
///   regime_mixture   {weights, drifts, noise_scale}
///   seasonal_regime  {weights, profiles, noise_scale}
///   bootstrap        {}  stage-length blocks of the warm-up history
///   replay           {}  the realized series itself (zero variance)
///   constant         {block}
///   external         {command, host, port, timeout_seconds}
struct SamplerConfig {
    std::string kind = "fit_ar";
    nlohmann::json params = nlohmann::json::object();

    friend bool operator==(const SamplerConfig&, const SamplerConfig&) = default;
};

/// Settings for the `synth` subcommand.
struct SynthConfig {
    std::string start = "2024-01-01T00:00:00Z";
    std::size_t hours = 0;
    std::vector<std::string> names{"price"};
    std::vector<double> initial;  // first history row; zeros when empty
    SamplerConfig sampler;

    friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

/// Everything one run needs. Stored as a single JSON document.
struct RunConfig {
    TreeConfig tree;
    BatteryParams battery;
    OptimizerConfig optimizer;
    double initial_soc = 0.0;
    std::size_t mean_samples = 0;
    std::size_t mc_trajectories = 0;
    std::size_t tree_workers = 1;
    std::size_t episode_workers = 1;
    std::size_t warmup_hours = 168;  // history before the first decision
    SamplerConfig sampler;
    SamplerConfig ar_sampler;  // feeds ar_tree_smpc
    std::vector<PolicyKind> policies = all_policies();
    std::string data_path;
    std::string trading_column = "price";
    std::string output_dir = "out";
    std::vector<std::uint64_t> seeds{0};
    SynthConfig synth;

    /// Field-level checks; throws DataError.
    void validate() const;
    HarnessConfig harness(std::size_t trading_dim) const;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Missing keys take defaults; unknown keys are rejected. Throws DataError.
RunConfig parse_run_config(const std::string& text);
std::string serialize_run_config(const RunConfig& cfg);
/// Reads a config file; a relative data path is resolved against the
/// file's directory.
RunConfig load_run_config(const std::string& path);

/// Cross-checks against the price data: column count, trading column,
/// warm-up length and block alignment. Returns the trading column index.
std::size_t check_against_data(const RunConfig& cfg, const PriceSeries& data);

/// Builds a sampler. `history` feeds fitted and bootstrap kinds, `series`
/// the replay kind; `h` is the stage length. Throws DataError on bad params.
std::unique_ptr<TrajectorySampler> make_sampler(const SamplerConfig& sc, const Matrix& history,
                                                const Matrix& series, std::size_t h);

/// Contiguous run of decision epochs starting inside one calendar month.
struct MonthWindow {
    std::string label;  // YYYY-MM
    std::size_t start = 0;
    std::size_t epochs = 0;
};

/// Epochs start every stage_horizon hours from the data start, at or after
/// warmup_hours, and belong to the month of their first hour. Months
/// without a full epoch and its lookahead are dropped.
std::vector<MonthWindow> month_windows(const PriceSeries& data, std::size_t warmup_hours,
                                       const TreeConfig& tree);

struct SimulationOutput {
    std::vector<MonthWindow> months;
    std::string report;  // aggregate CSV; cells average over seeds
    std::vector<std::pair<std::string, std::string>> logs;  // file name, episode JSON
};

SimulationOutput simulate(const RunConfig& cfg, const PriceSeries& data);

}  // namespace dst
