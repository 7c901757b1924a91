#include "dst/tree_program.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace dst {

void OptimizerConfig::validate() const {
    if (!(discount >= 0.0 && discount <= 1.0)) {
        throw InvalidInput("optimizer: discount must lie in [0, 1]");
    }
    if (!(solver_tolerance > 0.0)) {
        throw InvalidInput("optimizer: solver tolerance must be positive");
    }
    if (!std::isfinite(terminal_value_rate)) {
        throw InvalidInput("optimizer: terminal value rate must be finite");
    }
}

namespace {

void check_initial_soc(double soc, const BatteryParams& b) {
    if (soc < b.soc_min - kSocTolerance || soc > b.soc_max + kSocTolerance) {
        throw InvalidInput("initial SoC " + format_double(soc, 6, 'g') + " outside battery range");
    }
}

struct Coefficients {
    double charge;
    double discharge;
};

// Reward per MW of charge / discharge, before probability and discount weights.
Coefficients reward_coefficients(double price, const BatteryParams& b) {
    return {-price * b.dt - b.c_deg * b.dt, price * b.dt - b.c_deg * b.dt};
}

}  // namespace

TreeProgram formulate_tree_lp(const ScenarioTree& tree, const BatteryParams& battery,
                              const OptimizerConfig& cfg, double initial_soc,
                              std::size_t trading_dim) {
    battery.validate(true);
    cfg.validate();
    check_initial_soc(initial_soc, battery);
    tree.validate();
    if (trading_dim >= tree.config().series_dim) {
        throw InvalidInput("trading dimension out of range");
    }

    TreeProgram prog;
    prog.hours = tree.config().stage_horizon;
    prog.initial_soc = initial_soc;
    prog.battery = battery;
    const std::size_t H = prog.hours;
    const double soc_lo = battery.soc_min;
    const double soc_hi = battery.soc_max;

    for (const auto& node : tree.nodes()) {
        prog.node_slot.emplace(node.id, prog.node_ids.size());
        prog.node_ids.push_back(node.id);
    }

    for (const auto& node : tree.nodes()) {
        const bool leaf = node.children.empty();
        for (std::size_t j = 0; j < H; ++j) {
            const double weight =
                node.path_prob * std::pow(cfg.discount, static_cast<double>(node.stage * H + j));
            const auto coef = reward_coefficients(node.forecast(j, trading_dim), battery);
            const std::string tag = "n" + std::to_string(node.id) + "_h" + std::to_string(j);
            prog.lp.add_variable(0.0, battery.p_max, weight * coef.charge, tag + "_c");
            prog.lp.add_variable(0.0, battery.p_max, weight * coef.discharge, tag + "_d");
            double soc_cost = 0.0;
            if (leaf && j + 1 == H) {
                soc_cost = node.path_prob *
                           std::pow(cfg.discount, static_cast<double>((node.stage + 1) * H)) *
                           cfg.terminal_value_rate;
            }
            prog.lp.add_variable(soc_lo, soc_hi, soc_cost, tag + "_s");
        }
    }

    for (const auto& node : tree.nodes()) {
        for (std::size_t j = 0; j < H; ++j) {
            std::vector<LinearProgram::Term> terms{
                {prog.soc_var(node.id, j), 1.0},
                {prog.charge_var(node.id, j), -battery.eta_c * battery.dt},
                {prog.discharge_var(node.id, j), battery.dt / battery.eta_d},
            };
            double rhs = 0.0;
            if (j > 0) {
                terms.push_back({prog.soc_var(node.id, j - 1), -1.0});
            } else if (node.parent_id) {
                terms.push_back({prog.soc_var(*node.parent_id, H - 1), -1.0});
            } else {
                rhs = initial_soc;
            }
            prog.lp.add_row(std::move(terms), RowSense::Equal, rhs,
                            "bal_n" + std::to_string(node.id) + "_h" + std::to_string(j));
        }
    }
    return prog;
}

TreeProgram formulate_path_lp(const std::vector<double>& prices, const BatteryParams& battery,
                              const OptimizerConfig& cfg, double initial_soc) {
    if (prices.empty()) {
        battery.validate(true);
        check_initial_soc(initial_soc, battery);
        TreeProgram prog;
        prog.initial_soc = initial_soc;
        prog.battery = battery;
        prog.node_ids = {0};
        prog.node_slot = {{0, 0}};
        return prog;
    }
    TreeConfig tc;
    tc.depth = 1;
    tc.stage_horizon = prices.size();
    tc.series_dim = 1;
    ScenarioTree tree(tc, Matrix(prices.size(), 1, prices));
    return formulate_tree_lp(tree, battery, cfg, initial_soc, 0);
}

TreeProgram formulate_scenario_average_lp(const std::vector<std::vector<double>>& scenarios,
                                          const BatteryParams& battery, const OptimizerConfig& cfg,
                                          double initial_soc) {
    if (scenarios.empty()) {
        throw InvalidInput("scenario average: no scenarios");
    }
    const std::size_t hours = scenarios.front().size();
    for (const auto& s : scenarios) {
        if (s.size() != hours) {
            throw InvalidInput("scenario average: scenarios differ in length");
        }
    }
    // Build the layout on the first scenario, then replace the objective.
    TreeProgram prog = formulate_path_lp(scenarios.front(), battery, cfg, initial_soc);
    for (std::size_t j = 0; j < hours; ++j) {
        const double disc = std::pow(cfg.discount, static_cast<double>(j));
        // running mean: identical scenarios reproduce their coefficient exactly
        double charge = 0.0;
        double discharge = 0.0;
        for (std::size_t k = 0; k < scenarios.size(); ++k) {
            const auto coef = reward_coefficients(scenarios[k][j], battery);
            const double n = static_cast<double>(k + 1);
            charge += (disc * coef.charge - charge) / n;
            discharge += (disc * coef.discharge - discharge) / n;
        }
        prog.lp.objective[prog.charge_var(0, j)] = charge;
        prog.lp.objective[prog.discharge_var(0, j)] = discharge;
    }
    return prog;
}

TreeProgram formulate_open_loop_tree_lp(const ScenarioTree& tree, const BatteryParams& battery,
                                        const OptimizerConfig& cfg, double initial_soc,
                                        std::size_t trading_dim) {
    TreeProgram prog = formulate_tree_lp(tree, battery, cfg, initial_soc, trading_dim);
    for (std::size_t stage = 1; stage <= tree.max_stage(); ++stage) {
        const auto ids = tree.nodes_at_stage(stage);
        for (std::size_t k = 1; k < ids.size(); ++k) {
            for (std::size_t j = 0; j < prog.hours; ++j) {
                prog.lp.add_row({{prog.charge_var(ids[k], j), 1.0}, {prog.charge_var(ids[0], j), -1.0}},
                                RowSense::Equal, 0.0);
                prog.lp.add_row(
                    {{prog.discharge_var(ids[k], j), 1.0}, {prog.discharge_var(ids[0], j), -1.0}},
                    RowSense::Equal, 0.0);
            }
        }
    }
    return prog;
}

Solution solve_program(const TreeProgram& prog, const OptimizerConfig& cfg) {
    if (prog.lp.num_variables() == 0) {
        Solution empty;
        empty.status = SolveStatus::Optimal;
        return empty;
    }
    return solve_lp(prog.lp, cfg.solver_tolerance);
}

ActionPlan extract_policy(const TreeProgram& prog, const Solution& sol) {
    if (sol.status != SolveStatus::Optimal) {
        throw InvalidInput(std::string("extract_policy: solution is ") + to_string(sol.status));
    }
    if (sol.values.size() != prog.lp.num_variables()) {
        throw InvalidInput("extract_policy: solution does not match program");
    }
    const auto& b = prog.battery;
    constexpr double tol = 1e-9;
    ActionPlan plan;
    plan.root = prog.node_ids.front();
    for (NodeId id : prog.node_ids) {
        auto& hours = plan.per_node[id];
        hours.resize(prog.hours);
        for (std::size_t j = 0; j < prog.hours; ++j) {
            const std::size_t ci = prog.charge_var(id, j);
            const std::size_t di = prog.discharge_var(id, j);
            HourlyAction a{std::clamp(sol.values[ci], 0.0, b.p_max),
                           std::clamp(sol.values[di], 0.0, b.p_max)};
            if (a.p_c > tol && a.p_d > tol) {
                const double net = b.eta_c * a.p_c - a.p_d / b.eta_d;
                HourlyAction n{};
                if (net >= 0.0) {
                    n.p_c = net / b.eta_c;
                } else {
                    n.p_d = -net * b.eta_d;
                }
                const double cc = prog.lp.objective[ci];
                const double cd = prog.lp.objective[di];
                const double gain = cc * (n.p_c - a.p_c) + cd * (n.p_d - a.p_d);
                if (gain >= -1e-12 * (std::abs(cc) + std::abs(cd))) {
                    a = n;
                }
            }
            hours[j] = a;
        }
    }
    return plan;
}

// ---------------------------------------------------------------------------

namespace {

struct SocGrid {
    double lo;
    double hi;
    std::vector<double> points;

    double interpolate(const std::vector<double>& values, double s) const {
        if (hi <= lo) {
            return values.front();
        }
        const double pos = (std::clamp(s, lo, hi) - lo) / (hi - lo) * static_cast<double>(points.size() - 1);
        std::size_t k = static_cast<std::size_t>(std::floor(pos));
        if (k >= points.size() - 1) {
            return values.back();
        }
        const double w = pos - static_cast<double>(k);
        return values[k] * (1.0 - w) + values[k + 1] * w;
    }
};

struct DpContext {
    const BatteryParams& b;
    const SocGrid& grid;
    std::vector<double> action_grid;

    // Net power candidates from state s: the action grid plus every move
    // that lands exactly on a SoC grid point.
    std::vector<HourlyAction> candidates(double s) const {
        std::vector<HourlyAction> out;
        out.reserve(action_grid.size() + grid.points.size());
        auto push_net = [&](double net) {
            if (net >= 0.0) {
                out.push_back({net, 0.0});
            } else {
                out.push_back({0.0, -net});
            }
        };
        for (double a : action_grid) {
            push_net(a);
        }
        for (double target : grid.points) {
            const double delta = target - s;
            if (delta >= 0.0) {
                const double pc = delta / (b.eta_c * b.dt);
                if (pc <= b.p_max * (1.0 + 1e-12)) {
                    out.push_back({std::min(pc, b.p_max), 0.0});
                }
            } else {
                const double pd = -delta * b.eta_d / b.dt;
                if (pd <= b.p_max * (1.0 + 1e-12)) {
                    out.push_back({0.0, std::min(pd, b.p_max)});
                }
            }
        }
        return out;
    }

    bool feasible(double s_next) const {
        return s_next >= b.soc_min - 1e-12 && s_next <= b.soc_max + 1e-12;
    }

    // Best (value, action, next soc) for one hour at state s.
    std::tuple<double, HourlyAction, double> best(double s, double weight, double price,
                                                  const std::vector<double>& next_values) const {
        double best_v = -kInf;
        HourlyAction best_a{};
        double best_s = s;
        for (const auto& a : candidates(s)) {
            const double s_next = next_soc(s, a, b);
            if (!feasible(s_next)) {
                continue;
            }
            const double clamped = std::clamp(s_next, b.soc_min, b.soc_max);
            const double v = weight * step_reward(price, a, b) + grid.interpolate(next_values, clamped);
            if (v > best_v) {
                best_v = v;
                best_a = a;
                best_s = clamped;
            }
        }
        return {best_v, best_a, best_s};
    }
};

}  // namespace

Solution solve_tree_dp(const ScenarioTree& tree, const BatteryParams& battery,
                       const OptimizerConfig& cfg, double initial_soc, std::size_t soc_points,
                       std::size_t action_points, std::size_t trading_dim) {
    if (soc_points < 2 || action_points < 2) {
        throw InvalidInput("solve_tree_dp: grids need at least two points");
    }
    battery.validate(true);
    cfg.validate();
    tree.validate();
    check_initial_soc(initial_soc, battery);
    const double soc0 = std::clamp(initial_soc, battery.soc_min, battery.soc_max);

    SocGrid grid{battery.soc_min, battery.soc_max, {}};
    for (std::size_t k = 0; k < soc_points; ++k) {
        grid.points.push_back(battery.soc_min + (battery.soc_max - battery.soc_min) *
                                                    static_cast<double>(k) /
                                                    static_cast<double>(soc_points - 1));
    }
    DpContext ctx{battery, grid, {}};
    for (std::size_t l = 0; l < action_points; ++l) {
        ctx.action_grid.push_back(-battery.p_max + 2.0 * battery.p_max * static_cast<double>(l) /
                                                       static_cast<double>(action_points - 1));
    }

    const std::size_t H = tree.config().stage_horizon;
    const auto& nodes = tree.nodes();
    // value[node][hour] over the SoC grid; hour H is the end-of-node value
    std::vector<std::vector<std::vector<double>>> value(nodes.size());
    auto weight_of = [&](const ScenarioNode& n, std::size_t j) {
        return std::pow(cfg.discount, static_cast<double>(n.stage * H + j));
    };

    for (std::size_t idx = nodes.size(); idx-- > 0;) {
        const auto& node = nodes[idx];
        auto& v = value[idx];
        v.assign(H + 1, std::vector<double>(soc_points, 0.0));
        for (std::size_t k = 0; k < soc_points; ++k) {
            const double s = grid.points[k];
            if (node.children.empty()) {
                v[H][k] = std::pow(cfg.discount, static_cast<double>((node.stage + 1) * H)) *
                          cfg.terminal_value_rate * s;
            } else {
                double acc = 0.0;
                for (NodeId c : node.children) {
                    acc += tree.node(c).branch_prob * value[c][0][k];
                }
                v[H][k] = acc;
            }
        }
        for (std::size_t j = H; j-- > 0;) {
            const double price = node.forecast(j, trading_dim);
            for (std::size_t k = 0; k < soc_points; ++k) {
                v[j][k] = std::get<0>(ctx.best(grid.points[k], weight_of(node, j), price, v[j + 1]));
            }
        }
    }

    // Roll the greedy policy forward to report actions in program layout.
    Solution sol;
    sol.status = SolveStatus::Optimal;
    sol.values.assign(3 * H * nodes.size(), 0.0);
    std::vector<double> start_soc(nodes.size(), soc0);
    double objective = 0.0;
    for (const auto& node : nodes) {
        double s = start_soc[node.id];
        for (std::size_t j = 0; j < H; ++j) {
            const auto [val, act, s_next] =
                ctx.best(s, weight_of(node, j), node.forecast(j, trading_dim), value[node.id][j + 1]);
            if (node.id == 0 && j == 0) {
                objective = val;
            }
            const std::size_t base = 3 * (node.id * H + j);
            sol.values[base] = act.p_c;
            sol.values[base + 1] = act.p_d;
            sol.values[base + 2] = s_next;
            s = s_next;
        }
        for (NodeId c : node.children) {
            start_soc[c] = s;
        }
    }
    sol.objective = objective;
    return sol;
}

}  // namespace dst
