#pragma once

#include <map>
#include <vector>

#include "dst/battery.hpp"
#include "dst/linear_program.hpp"
#include "dst/scenario_tree.hpp"

namespace dst {

struct OptimizerConfig {
    double discount = 1.0;           // per hour
    double solver_tolerance = 1e-9;
    double terminal_value_rate = 0.0;  // $/MWh credited to energy left at the leaves

    void validate() const;

    friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

/// The multistage program over a scenario tree.
///
/// Per node and hour there are three variables, laid out node-major then
/// hour then (charge, discharge, soc). One SoC balance row per node-hour;
/// the first hour of a node chains from its parent's last hour, so siblings
/// share every ancestor decision and non-anticipativity needs no rows.
struct TreeProgram {
    LinearProgram lp;
    std::vector<NodeId> node_ids;            // node order in the layout
    std::map<NodeId, std::size_t> node_slot; // node id -> position in node_ids
    std::size_t hours = 0;                   // per node
    double initial_soc = 0.0;
    BatteryParams battery;

    std::size_t charge_var(NodeId node, std::size_t hour) const { return base(node, hour); }
    std::size_t discharge_var(NodeId node, std::size_t hour) const { return base(node, hour) + 1; }
    std::size_t soc_var(NodeId node, std::size_t hour) const { return base(node, hour) + 2; }

private:
    std::size_t base(NodeId node, std::size_t hour) const {
        return 3 * (node_slot.at(node) * hours + hour);
    }
};

/// Prices settled at node-hour (i, j) are forecast(j, trading_dim).
TreeProgram formulate_tree_lp(const ScenarioTree& tree, const BatteryParams& battery,
                              const OptimizerConfig& cfg, double initial_soc,
                              std::size_t trading_dim = 0);

/// Single-scenario program over a price path (a one-node tree of
/// prices.size() hours).
TreeProgram formulate_path_lp(const std::vector<double>& prices, const BatteryParams& battery,
                              const OptimizerConfig& cfg, double initial_soc);

/// Open-loop program: one action sequence over the path, scored by the
/// average over `scenarios` of each scenario's reward.
TreeProgram formulate_scenario_average_lp(const std::vector<std::vector<double>>& scenarios,
                                          const BatteryParams& battery, const OptimizerConfig& cfg,
                                          double initial_soc);

/// Same tree, but every node at a stage must repeat the actions of the
/// first node of that stage (no recourse).
TreeProgram formulate_open_loop_tree_lp(const ScenarioTree& tree, const BatteryParams& battery,
                                        const OptimizerConfig& cfg, double initial_soc,
                                        std::size_t trading_dim = 0);

Solution solve_program(const TreeProgram& prog, const OptimizerConfig& cfg);

struct ActionPlan {
    std::map<NodeId, std::vector<HourlyAction>> per_node;
    NodeId root = 0;

    const std::vector<HourlyAction>& first_stage() const { return per_node.at(root); }
};

/// Reads per-node hourly actions out of an optimal solution. Hours with
/// simultaneous charge and discharge are netted to the same SoC change
/// whenever that does not lower the objective.
ActionPlan extract_policy(const TreeProgram& prog, const Solution& sol);

/// Backward induction on a SoC grid (soc_points) with net-power actions
/// from a grid (action_points) plus the moves that land exactly on SoC grid
/// points. Continuation values between grid points are interpolated
/// linearly; the true value function is concave in SoC, so the result is a
/// lower bound on the program optimum. Solution values hold the greedy
/// policy rolled forward from initial_soc, in TreeProgram layout.
Solution solve_tree_dp(const ScenarioTree& tree, const BatteryParams& battery,
                       const OptimizerConfig& cfg, double initial_soc, std::size_t soc_points,
                       std::size_t action_points, std::size_t trading_dim = 0);

}  // namespace dst
