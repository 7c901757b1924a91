// dstree: scenario-tree planning from the command line.
//
//   dstree build-tree --config c.json [--seed N] [--format json|dot] [--out DIR]
//   dstree plan       --config c.json [--policy dst_smpc] [--format csv|json]
//   dstree simulate   --config c.json [--policy P] [--seed N] [--out DIR]
//   dstree bench      --config c.json
//   dstree synth      --config c.json [--seed N] [--out FILE]
//
// Exit status: 0 ok, 1 usage, 2 data, 3 solver.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "dst/harness.hpp"
#include "dst/price_data.hpp"
#include "dst/run_config.hpp"
#include "dst/synthetic_samplers.hpp"
#include "dst/tree_program.hpp"

using namespace dst;
namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string policy;
    std::string format;
};

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream f(path, std::ios::binary);
    f << text;
    if (!f) {
        throw DataError("cannot write '" + path.string() + "'");
    }
}

void require_format(const Flags& f, std::initializer_list<const char*> allowed) {
    if (f.format.empty()) {
        return;
    }
    for (const char* a : allowed) {
        if (f.format == a) {
            return;
        }
    }
    throw UsageError("--format " + f.format + " is not supported by this command");
}

PriceSeries load_data(const RunConfig& cfg) {
    if (cfg.data_path.empty()) {
        throw DataError("config has no data.path");
    }
    return load_prices(cfg.data_path);
}

// First decision epoch: its start hour and the history visible there.
std::pair<std::size_t, Matrix> first_epoch(const RunConfig& cfg, const PriceSeries& data) {
    const auto windows = month_windows(data, cfg.warmup_hours, cfg.tree);
    if (windows.empty()) {
        throw DataError("price data is too short for a single decision epoch after the warm-up");
    }
    const std::size_t t = windows.front().start;
    return {t, data.values.slice_rows(0, t + cfg.tree.stage_horizon)};
}

int cmd_build_tree(const Flags& f) {
    require_format(f, {"json", "dot"});
    RunConfig cfg = load_run_config(f.config);
    const PriceSeries data = load_data(cfg);
    check_against_data(cfg, data);
    const auto [t, history] = first_epoch(cfg, data);
    const auto sampler =
        make_sampler(cfg.sampler, data.values.slice_rows(0, cfg.warmup_hours), data.values, cfg.tree.stage_horizon);
    TreeConfig tc = cfg.tree;
    if (f.seed) {
        tc.master_seed = *f.seed;
    }
    const ScenarioTree tree = build_tree(*sampler, history, tc, BuildOptions{cfg.tree_workers});
    if (!f.out.empty()) {
        write_file(fs::path(f.out) / "tree.json", tree_to_json(tree));
        write_file(fs::path(f.out) / "tree.dot", export_dot(tree));
        std::cerr << "wrote " << tree.size() << "-node tree to " << f.out << "\n";
    } else {
        std::cout << (f.format == "dot" ? export_dot(tree) : tree_to_json(tree));
    }
    return 0;
}

int cmd_plan(const Flags& f) {
    require_format(f, {"csv", "json"});
    const RunConfig cfg = load_run_config(f.config);
    const PriceSeries data = load_data(cfg);
    const std::size_t td = check_against_data(cfg, data);
    const PolicyKind kind = f.policy.empty() ? PolicyKind::DstTree : parse_policy(f.policy);
    const auto [t, history] = first_epoch(cfg, data);
    const Matrix warm = data.values.slice_rows(0, cfg.warmup_hours);
    std::unique_ptr<TrajectorySampler> sampler;
    if (kind == PolicyKind::ArTree) {
        sampler = make_sampler(cfg.ar_sampler, warm, data.values, cfg.tree.stage_horizon);
    } else if (kind != PolicyKind::Perfect && kind != PolicyKind::Oracle) {
        sampler = make_sampler(cfg.sampler, warm, data.values, cfg.tree.stage_horizon);
    }
    const std::uint64_t seed = f.seed ? *f.seed : cfg.seeds.front();
    const auto res = run_episode(kind, data.values, sampler.get(), cfg.harness(td), t, 1, seed);
    const auto& log = res.epochs.front();
    if (f.format == "json") {
        nlohmann::ordered_json j;
        j["policy"] = to_string(kind);
        j["start"] = format_timestamp(data.hours[t]);
        j["objective"] = log.plan_objective;
        j["plan"] = nlohmann::ordered_json::array();
        for (std::size_t k = 0; k < log.plan.size(); ++k) {
            j["plan"].push_back({{"timestamp", format_timestamp(data.hours[t + k])},
                                 {"p_c", log.plan[k].p_c},
                                 {"p_d", log.plan[k].p_d}});
        }
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "timestamp,price,p_c,p_d\n";
        for (std::size_t k = 0; k < log.plan.size(); ++k) {
            std::cout << format_timestamp(data.hours[t + k]) << "," << format_double(log.prices[k], 2) << ","
                      << format_double(log.plan[k].p_c, 4) << "," << format_double(log.plan[k].p_d, 4) << "\n";
        }
    }
    return 0;
}

int cmd_simulate(const Flags& f) {
    require_format(f, {"csv"});
    RunConfig cfg = load_run_config(f.config);
    if (!f.policy.empty()) {
        cfg.policies = {parse_policy(f.policy)};
    }
    if (f.seed) {
        cfg.seeds = {*f.seed};
    }
    const PriceSeries data = load_data(cfg);
    const auto sim = simulate(cfg, data);
    const fs::path out = f.out.empty() ? fs::path(cfg.output_dir) : fs::path(f.out);
    write_file(out / "report.csv", sim.report);
    for (const auto& [name, text] : sim.logs) {
        write_file(out / "logs" / name, text);
    }
    std::cout << sim.report;
    std::cerr << "wrote " << (out / "report.csv").string() << " and " << sim.logs.size() << " episode logs\n";
    return 0;
}

int cmd_bench(const Flags& f) {
    require_format(f, {"csv"});
    const RunConfig cfg = load_run_config(f.config);
    Matrix history(cfg.tree.stage_horizon, cfg.tree.series_dim, 0.0);
    Matrix warm = history;
    Matrix series = history;
    std::size_t td = 0;
    if (!cfg.data_path.empty()) {
        const PriceSeries data = load_data(cfg);
        td = check_against_data(cfg, data);
        warm = data.values.slice_rows(0, cfg.warmup_hours);
        history = first_epoch(cfg, data).second;
        series = data.values;
    }
    const auto sampler = make_sampler(cfg.sampler, warm, series, cfg.tree.stage_horizon);
    const std::uint64_t seed = f.seed ? *f.seed : cfg.seeds.front();
    std::cout << "depth,clusters,keep_children,samples,nodes,variables,build_ms,solve_ms,objective\n";
    for (std::size_t depth : {1, 2, 3}) {
        for (std::size_t k : {2, 4}) {
            for (std::size_t m : {64, 256}) {
                TreeConfig tc = cfg.tree;
                tc.depth = depth;
                tc.clusters = k;
                tc.keep_children = std::min<std::size_t>(2, k);
                tc.samples_per_node = m;
                tc.master_seed = seed;
                using clock = std::chrono::steady_clock;
                const auto t0 = clock::now();
                const ScenarioTree tree = build_tree(*sampler, history, tc, BuildOptions{cfg.tree_workers});
                const auto t1 = clock::now();
                const TreeProgram prog = formulate_tree_lp(tree, cfg.battery, cfg.optimizer, cfg.initial_soc, td);
                const Solution sol = solve_program(prog, cfg.optimizer);
                const auto t2 = clock::now();
                if (sol.status != SolveStatus::Optimal) {
                    throw SolverFailure(std::string("bench program is ") + to_string(sol.status));
                }
                auto ms = [](auto d) { return std::chrono::duration<double, std::milli>(d).count(); };
                std::cout << depth << "," << k << "," << tc.keep_children << "," << m << "," << tree.size() << ","
                          << prog.lp.num_variables() << "," << format_double(ms(t1 - t0), 2) << ","
                          << format_double(ms(t2 - t1), 2) << "," << format_double(sol.objective, 4) << "\n";
            }
        }
    }
    return 0;
}

int cmd_synth(const Flags& f) {
    require_format(f, {"csv"});
    const RunConfig cfg = load_run_config(f.config);
    const SynthConfig& sc = cfg.synth;
    if (sc.hours == 0) {
        throw DataError("config: synth.hours must be positive");
    }
    const std::size_t d = sc.names.size();
    Matrix init(1, d, 0.0);
    if (!sc.initial.empty()) {
        if (sc.initial.size() != d) {
            throw DataError("config: synth.initial must have one value per name");
        }
        init = Matrix(1, d, sc.initial);
    }
    const std::size_t H = cfg.tree.stage_horizon;
    const auto sampler = make_sampler(sc.sampler, init, init, H);
    if (sampler->dim() != d) {
        throw DataError("config: synth sampler has dimension " + std::to_string(sampler->dim()) + " but " +
                        std::to_string(d) + " names");
    }
    const std::uint64_t seed = f.seed ? *f.seed : cfg.seeds.front();
    const Matrix path = rollout_trajectories(*sampler, init, 1, H, (sc.hours + H - 1) / H, seed).front();

    PriceSeries series;
    series.names = sc.names;
    series.values = path.slice_rows(0, sc.hours);
    const std::int64_t start = parse_timestamp(sc.start);
    for (std::size_t t = 0; t < sc.hours; ++t) {
        series.hours.push_back(start + static_cast<std::int64_t>(t));
    }
    std::ostringstream text;
    write_prices_csv(text, series);
    if (f.out.empty()) {
        std::cout << text.str();
    } else {
        write_file(f.out, text.str());
        std::cerr << "wrote " << sc.hours << " hours to " << f.out << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scenario-tree stochastic MPC for battery arbitrage"};
    app.require_subcommand(1);
    Flags flags;
    std::uint64_t seed = 0;

    auto add = [&](const char* name, const char* help) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", flags.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "seed override");
        sub->add_option("--out", flags.out, "output directory (a file for synth)");
        sub->add_option("--policy", flags.policy, "policy name, e.g. dst_smpc");
        sub->add_option("--format", flags.format, "output format")->check(CLI::IsMember({"csv", "json", "dot"}));
        return sub;
    };
    CLI::App* build = add("build-tree", "build one scenario tree; JSON or DOT");
    CLI::App* plan = add("plan", "plan the first epoch and print the first-stage actions");
    CLI::App* sim = add("simulate", "run every policy over the data; write report and logs");
    CLI::App* bench = add("bench", "time tree construction and solve across sizes");
    CLI::App* synth = add("synth", "generate a synthetic price CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }
    for (CLI::App* sub : app.get_subcommands()) {
        if (sub->count("--seed") > 0) {
            flags.seed = seed;
        }
    }

    try {
        if (build->parsed()) return cmd_build_tree(flags);
        if (plan->parsed()) return cmd_plan(flags);
        if (sim->parsed()) return cmd_simulate(flags);
        if (bench->parsed()) return cmd_bench(flags);
        if (synth->parsed()) return cmd_synth(flags);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const SolverFailure& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 3;
    } catch (const InfeasibleAction& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 3;
    } catch (const InvalidInput& e) {
        // bad names given on the command line
        if (std::string(e.what()).rfind("unknown policy", 0) == 0) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
