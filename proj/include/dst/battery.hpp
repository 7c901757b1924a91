#pragma once

#include <optional>
#include <string>
#include <vector>

namespace dst {

/// Storage asset parameters. Energies in MWh, powers in MW, prices in $/MWh.
struct BatteryParams {
    double capacity = 1.0;
    double soc_min = 0.0;
    double soc_max = 1.0;
    double p_max = 0.5;
    double eta_c = 0.95;
    double eta_d = 0.95;
    double c_deg = 1.0;  // degradation cost per MWh of throughput
    double dt = 1.0;     // hours per step

    /// Throws InvalidInput when a field is out of range. With
    /// `allow_empty_range` a battery whose usable range is zero
    /// (soc_min == soc_max, capacity possibly 0) is accepted for planning.
    void validate(bool allow_empty_range = false) const;

    friend bool operator==(const BatteryParams&, const BatteryParams&) = default;
};

struct Observation {
    double soc = 0.0;
    std::vector<double> prices;
    std::size_t time = 0;
};

struct HourlyAction {
    double p_c = 0.0;
    double p_d = 0.0;

    friend bool operator==(const HourlyAction&, const HourlyAction&) = default;
};

struct StepResult {
    double next_soc = 0.0;
    double reward = 0.0;
};

inline constexpr double kSocTolerance = 1e-9;

/// SoC after one step: soc + eta_c p_c dt - p_d dt / eta_d.
double next_soc(double soc, const HourlyAction& act, const BatteryParams& battery);

/// Settlement: lambda (p_d - p_c) dt - c_deg (p_c + p_d) dt.
double step_reward(double price, const HourlyAction& act, const BatteryParams& battery);

/// One environment transition, settled at prices[trading_dim].
///
/// Throws InfeasibleAction when the action exceeds the power limits or
/// leaves [soc_min, soc_max] by more than kSocTolerance. A next SoC within
/// tolerance of a bound is snapped onto it.
StepResult step(const Observation& obs, const HourlyAction& act, const BatteryParams& battery,
                std::size_t trading_dim = 0);

struct PlanViolation {
    std::size_t hour = 0;
    std::string bound;  // "soc_min", "soc_max", "p_max" or "negative power"
    double soc = 0.0;
};

/// Replays a plan's SoC recursion; returns the first violation, if any.
std::optional<PlanViolation> validate_plan(double soc0, const std::vector<HourlyAction>& plan,
                                           const BatteryParams& battery);

}  // namespace dst
