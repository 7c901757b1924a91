#include "dst/run_config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "dst/external_sampler.hpp"
#include "dst/synthetic_samplers.hpp"

namespace dst {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Reads the keys of one JSON object and rejects the ones nobody asked for.
class Section {
public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) {
            throw DataError("config: '" + name_ + "' must be an object");
        }
    }

    template <class T>
    void get(const std::string& key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) {
            return;
        }
        const json& v = j_.at(key);
        if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
            if (!v.is_number_unsigned()) {
                throw DataError("config: " + path(key) + " must be a non-negative integer");
            }
        }
        try {
            out = v.get<T>();
        } catch (const json::exception& e) {
            throw DataError("config: " + path(key) + ": " + e.what());
        }
    }

    const json* child(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const {
        for (const auto& item : j_.items()) {
            if (!seen_.count(item.key())) {
                throw DataError("config: unknown key " + path(item.key()));
            }
        }
    }

    std::string path(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

private:
    const json& j_;
    std::string name_;
    std::set<std::string> seen_;
};

SamplerConfig read_sampler(const json& j, const std::string& name) {
    Section s(j, name);
    SamplerConfig sc;
    s.get("kind", sc.kind);
    if (const json* p = s.child("params")) {
        if (!p->is_object()) {
            throw DataError("config: " + name + ".params must be an object");
        }
        sc.params = *p;
    }
    s.finish();
    return sc;
}

ordered_json write_sampler(const SamplerConfig& sc) {
    ordered_json j;
    j["kind"] = sc.kind;
    j["params"] = sc.params;
    return j;
}

Matrix to_matrix(const json& rows, const std::string& what) {
    try {
        return Matrix::from_rows(rows.get<std::vector<std::vector<double>>>());
    } catch (const json::exception&) {
        throw DataError(what + " must be a list of equally long rows of numbers");
    } catch (const InvalidInput&) {
        throw DataError(what + " must be a list of equally long rows of numbers");
    }
}

template <class T>
T param(const SamplerConfig& sc, const std::string& key) {
    if (!sc.params.contains(key)) {
        throw DataError("sampler " + sc.kind + ": missing parameter '" + key + "'");
    }
    try {
        return sc.params.at(key).get<T>();
    } catch (const json::exception& e) {
        throw DataError("sampler " + sc.kind + ": parameter '" + key + "': " + e.what());
    }
}

void only_params(const SamplerConfig& sc, const std::set<std::string>& allowed) {
    for (const auto& item : sc.params.items()) {
        if (!allowed.count(item.key())) {
            throw DataError("sampler " + sc.kind + ": unknown parameter '" + item.key() + "'");
        }
    }
}

}  // namespace

void RunConfig::validate() const {
    try {
        tree.validate();
        battery.validate();
        optimizer.validate();
        harness(0).validate();
    } catch (const InvalidInput& e) {
        throw DataError(std::string("config: ") + e.what());
    }
    if (episode_workers == 0) {
        throw DataError("config: episode_workers must be at least 1");
    }
    if (policies.empty()) {
        throw DataError("config: no policies");
    }
    if (seeds.empty()) {
        throw DataError("config: no seeds");
    }
}

HarnessConfig RunConfig::harness(std::size_t trading_dim) const {
    HarnessConfig h;
    h.tree = tree;
    h.battery = battery;
    h.optimizer = optimizer;
    h.initial_soc = initial_soc;
    h.trading_dim = trading_dim;
    h.mean_samples = mean_samples;
    h.mc_trajectories = mc_trajectories;
    h.tree_workers = tree_workers;
    return h;
}

RunConfig parse_run_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig cfg;
    Section top(root, "");

    if (const json* t = top.child("tree")) {
        Section s(*t, "tree");
        s.get("depth", cfg.tree.depth);
        s.get("stage_horizon", cfg.tree.stage_horizon);
        s.get("samples_per_node", cfg.tree.samples_per_node);
        s.get("clusters", cfg.tree.clusters);
        s.get("keep_children", cfg.tree.keep_children);
        s.get("series_dim", cfg.tree.series_dim);
        s.get("master_seed", cfg.tree.master_seed);
        s.finish();
    }
    if (const json* b = top.child("battery")) {
        Section s(*b, "battery");
        s.get("capacity", cfg.battery.capacity);
        s.get("soc_min", cfg.battery.soc_min);
        s.get("soc_max", cfg.battery.soc_max);
        s.get("p_max", cfg.battery.p_max);
        s.get("eta_c", cfg.battery.eta_c);
        s.get("eta_d", cfg.battery.eta_d);
        s.get("c_deg", cfg.battery.c_deg);
        s.get("dt", cfg.battery.dt);
        s.finish();
    }
    if (const json* o = top.child("optimizer")) {
        Section s(*o, "optimizer");
        s.get("discount", cfg.optimizer.discount);
        s.get("solver_tolerance", cfg.optimizer.solver_tolerance);
        s.get("terminal_value_rate", cfg.optimizer.terminal_value_rate);
        s.finish();
    }
    if (const json* h = top.child("harness")) {
        Section s(*h, "harness");
        s.get("initial_soc", cfg.initial_soc);
        s.get("mean_samples", cfg.mean_samples);
        s.get("mc_trajectories", cfg.mc_trajectories);
        s.get("tree_workers", cfg.tree_workers);
        s.get("episode_workers", cfg.episode_workers);
        s.get("warmup_hours", cfg.warmup_hours);
        s.finish();
    }
    if (const json* p = top.child("sampler")) {
        cfg.sampler = read_sampler(*p, "sampler");
    }
    if (const json* p = top.child("ar_sampler")) {
        cfg.ar_sampler = read_sampler(*p, "ar_sampler");
    }
    if (const json* p = top.child("policies")) {
        std::vector<std::string> names;
        try {
            names = p->get<std::vector<std::string>>();
        } catch (const json::exception&) {
            throw DataError("config: policies must be a list of names");
        }
        cfg.policies.clear();
        for (const auto& n : names) {
            try {
                cfg.policies.push_back(parse_policy(n));
            } catch (const InvalidInput& e) {
                throw DataError(std::string("config: ") + e.what());
            }
        }
    }
    if (const json* d = top.child("data")) {
        Section s(*d, "data");
        s.get("path", cfg.data_path);
        s.get("trading_column", cfg.trading_column);
        s.finish();
    }
    top.get("output_dir", cfg.output_dir);
    if (const json* p = top.child("seeds")) {
        if (!p->is_array()) {
            throw DataError("config: seeds must be a list");
        }
        cfg.seeds.clear();
        for (const auto& v : *p) {
            if (!v.is_number_unsigned()) {
                throw DataError("config: seeds must be non-negative integers");
            }
            cfg.seeds.push_back(v.get<std::uint64_t>());
        }
    }
    if (const json* p = top.child("synth")) {
        Section s(*p, "synth");
        s.get("start", cfg.synth.start);
        s.get("hours", cfg.synth.hours);
        s.get("names", cfg.synth.names);
        s.get("initial", cfg.synth.initial);
        if (const json* q = s.child("sampler")) {
            cfg.synth.sampler = read_sampler(*q, "synth.sampler");
        }
        s.finish();
    }
    top.finish();
    cfg.validate();
    return cfg;
}

std::string serialize_run_config(const RunConfig& cfg) {
    ordered_json j;
    j["tree"] = {{"depth", cfg.tree.depth},
                 {"stage_horizon", cfg.tree.stage_horizon},
                 {"samples_per_node", cfg.tree.samples_per_node},
                 {"clusters", cfg.tree.clusters},
                 {"keep_children", cfg.tree.keep_children},
                 {"series_dim", cfg.tree.series_dim},
                 {"master_seed", cfg.tree.master_seed}};
    j["battery"] = {{"capacity", cfg.battery.capacity}, {"soc_min", cfg.battery.soc_min},
                    {"soc_max", cfg.battery.soc_max},   {"p_max", cfg.battery.p_max},
                    {"eta_c", cfg.battery.eta_c},       {"eta_d", cfg.battery.eta_d},
                    {"c_deg", cfg.battery.c_deg},       {"dt", cfg.battery.dt}};
    j["optimizer"] = {{"discount", cfg.optimizer.discount},
                      {"solver_tolerance", cfg.optimizer.solver_tolerance},
                      {"terminal_value_rate", cfg.optimizer.terminal_value_rate}};
    j["harness"] = {{"initial_soc", cfg.initial_soc},         {"mean_samples", cfg.mean_samples},
                    {"mc_trajectories", cfg.mc_trajectories}, {"tree_workers", cfg.tree_workers},
                    {"episode_workers", cfg.episode_workers}, {"warmup_hours", cfg.warmup_hours}};
    j["sampler"] = write_sampler(cfg.sampler);
    j["ar_sampler"] = write_sampler(cfg.ar_sampler);
    j["policies"] = ordered_json::array();
    for (auto p : cfg.policies) {
        j["policies"].push_back(to_string(p));
    }
    j["data"] = {{"path", cfg.data_path}, {"trading_column", cfg.trading_column}};
    j["output_dir"] = cfg.output_dir;
    j["seeds"] = cfg.seeds;
    j["synth"] = {{"start", cfg.synth.start},
                  {"hours", cfg.synth.hours},
                  {"names", cfg.synth.names},
                  {"initial", cfg.synth.initial},
                  {"sampler", write_sampler(cfg.synth.sampler)}};
    return j.dump(2) + "\n";
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open config '" + path + "'");
    }
    std::ostringstream text;
    text << in.rdbuf();
    RunConfig cfg;
    try {
        cfg = parse_run_config(text.str());
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
    namespace fs = std::filesystem;
    if (!cfg.data_path.empty() && fs::path(cfg.data_path).is_relative()) {
        cfg.data_path = (fs::path(path).parent_path() / cfg.data_path).lexically_normal().string();
    }
    return cfg;
}

std::size_t check_against_data(const RunConfig& cfg, const PriceSeries& data) {
    if (data.names.size() != cfg.tree.series_dim) {
        throw DataError("config has series_dim " + std::to_string(cfg.tree.series_dim) + " but the data has " +
                        std::to_string(data.names.size()) + " price columns");
    }
    const std::size_t td = data.column(cfg.trading_column);
    const std::size_t H = cfg.tree.stage_horizon;
    if (24 % H == 0 && data.hours.front() % static_cast<std::int64_t>(H) != 0) {
        throw DataError("data starts at " + format_timestamp(data.hours.front()) + ", not on a " +
                        std::to_string(H) + "-hour block boundary");
    }
    if (data.rows() <= cfg.warmup_hours) {
        throw DataError("data has " + std::to_string(data.rows()) + " hours, not more than the warm-up of " +
                        std::to_string(cfg.warmup_hours));
    }
    return td;
}

std::unique_ptr<TrajectorySampler> make_sampler(const SamplerConfig& sc, const Matrix& history,
                                                const Matrix& series, std::size_t h) {
    try {
        if (sc.kind == "gaussian_ar") {
            only_params(sc, {"transition", "intercept", "noise_scale"});
            GaussianARParams p{to_matrix(sc.params.value("transition", json::array()), "transition"),
                               param<std::vector<double>>(sc, "intercept"),
                               param<std::vector<double>>(sc, "noise_scale")};
            return std::make_unique<GaussianARSampler>(std::move(p));
        }
        if (sc.kind == "fit_ar") {
            only_params(sc, {});
            return std::make_unique<GaussianARSampler>(fit_gaussian_ar(history));
        }
        if (sc.kind == "regime_mixture") {
            only_params(sc, {"weights", "drifts", "noise_scale"});
            RegimeMixtureParams p{param<std::vector<double>>(sc, "weights"),
                                  param<std::vector<std::vector<double>>>(sc, "drifts"),
                                  param<double>(sc, "noise_scale")};
            return std::make_unique<RegimeMixtureSampler>(std::move(p));
        }
        if (sc.kind == "seasonal_regime") {
            only_params(sc, {"weights", "profiles", "noise_scale"});
            SeasonalRegimeParams p;
            p.weights = param<std::vector<double>>(sc, "weights");
            for (const auto& prof : param<json>(sc, "profiles")) {
                p.profiles.push_back(to_matrix(prof, "profiles"));
            }
            p.noise_scale = param<double>(sc, "noise_scale");
            return std::make_unique<SeasonalRegimeSampler>(std::move(p));
        }
        if (sc.kind == "bootstrap") {
            only_params(sc, {});
            return std::make_unique<BootstrapSampler>(BootstrapSampler::blocks_from_series(history, h));
        }
        if (sc.kind == "replay") {
            only_params(sc, {});
            return std::make_unique<ReplaySampler>(series);
        }
        if (sc.kind == "constant") {
            only_params(sc, {"block"});
            return std::make_unique<ConstantSampler>(to_matrix(param<json>(sc, "block"), "block"));
        }
        if (sc.kind == "external") {
            only_params(sc, {"command", "host", "port", "timeout_seconds"});
            ExternalEndpoint ep;
            ep.command = sc.params.value("command", std::vector<std::string>{});
            ep.host = sc.params.value("host", ep.host);
            ep.port = sc.params.value("port", ep.port);
            ep.timeout_seconds = sc.params.value("timeout_seconds", ep.timeout_seconds);
            return std::make_unique<ExternalSampler>(std::move(ep));
        }
    } catch (const InvalidInput& e) {
        throw DataError("sampler " + sc.kind + ": " + e.what());
    } catch (const json::exception& e) {
        throw DataError("sampler " + sc.kind + ": " + e.what());
    }
    throw DataError("unknown sampler kind '" + sc.kind + "'");
}

std::vector<MonthWindow> month_windows(const PriceSeries& data, std::size_t warmup_hours,
                                       const TreeConfig& tree) {
    const std::size_t H = tree.stage_horizon;
    std::vector<MonthWindow> out;
    const std::size_t first = (warmup_hours + H - 1) / H * H;
    for (std::size_t t = first; t + (tree.depth + 1) * H <= data.rows(); t += H) {
        const std::string label = data.month(t);
        if (out.empty() || out.back().label != label) {
            out.push_back({label, t, 0});
        }
        ++out.back().epochs;
    }
    return out;
}

SimulationOutput simulate(const RunConfig& cfg, const PriceSeries& data) {
    cfg.validate();
    const std::size_t td = check_against_data(cfg, data);
    const HarnessConfig hc = cfg.harness(td);
    const std::size_t H = cfg.tree.stage_horizon;

    SimulationOutput out;
    out.months = month_windows(data, cfg.warmup_hours, cfg.tree);
    if (out.months.empty()) {
        throw DataError("price data is too short for a single decision epoch after the warm-up");
    }

    const Matrix history = data.values.slice_rows(0, cfg.warmup_hours);
    bool need_main = false, need_ar = false;
    for (auto p : cfg.policies) {
        need_main |= p == PolicyKind::Deterministic || p == PolicyKind::MonteCarlo || p == PolicyKind::DstTree;
        need_ar |= p == PolicyKind::ArTree;
    }
    std::unique_ptr<TrajectorySampler> main_sampler, ar_sampler;
    if (need_main) {
        main_sampler = make_sampler(cfg.sampler, history, data.values, H);
    }
    if (need_ar) {
        ar_sampler = make_sampler(cfg.ar_sampler, history, data.values, H);
    }

    std::vector<EpisodeJob> jobs;
    for (std::size_t mi = 0; mi < out.months.size(); ++mi) {
        const auto& w = out.months[mi];
        for (auto p : cfg.policies) {
            for (auto s : cfg.seeds) {
                jobs.push_back({w.label, p, w.start, w.epochs, mix_seed(s, mi)});
            }
        }
    }
    const auto results =
        run_jobs(jobs, data.values, main_sampler.get(), ar_sampler.get(), hc, cfg.episode_workers);

    std::map<std::string, std::map<PolicyKind, EpisodeResult>> table;
    std::vector<std::string> labels;
    std::size_t i = 0;
    for (const auto& w : out.months) {
        labels.push_back(w.label);
        for (auto p : cfg.policies) {
            double sum = 0.0;
            for (auto s : cfg.seeds) {
                sum += results[i].total_reward;
                out.logs.emplace_back(w.label + "_" + to_string(p) + "_seed" + std::to_string(s) + ".json",
                                      episode_to_json(results[i]));
                ++i;
            }
            EpisodeResult cell;
            cell.kind = p;
            cell.total_reward = sum / static_cast<double>(cfg.seeds.size());
            table[w.label][p] = cell;
        }
    }
    out.report = aggregate_report(labels, cfg.policies, table);
    return out;
}

}  // namespace dst
