#include "json.hpp"

#include <numeric>
#include <sstream>

#include "dst/scenario_tree.hpp"

namespace dst {
namespace {

std::string num17(double v) {
    return format_double(v, 17, 'g');
}

double mean_of(const Matrix& m) {
    if (m.empty()) {
        return 0.0;
    }
    return std::accumulate(m.data().begin(), m.data().end(), 0.0) / static_cast<double>(m.size());
}

}  // namespace

std::string export_dot(const ScenarioTree& tree) {
    std::ostringstream out;
    out << "digraph scenario_tree {\n";
    out << "  rankdir=LR;\n";
    out << "  node [shape=record];\n";
    for (const auto& n : tree.nodes()) {
        out << "  n" << n.id << " [label=\"" << n.id << " | " << n.stage << " | "
            << format_double(n.path_prob, 4) << " | " << format_double(mean_of(n.forecast), 2)
            << "\"];\n";
    }
    for (const auto& n : tree.nodes()) {
        for (NodeId c : n.children) {
            out << "  n" << n.id << " -> n" << c << " [label=\""
                << format_double(tree.node(c).branch_prob, 4) << "\"];\n";
        }
    }
    out << "}\n";
    return out.str();
}

std::string tree_to_json(const ScenarioTree& tree) {
    const auto& c = tree.config();
    std::ostringstream out;
    out << "{\"config\":{\"depth\":" << c.depth << ",\"stage_horizon\":" << c.stage_horizon
        << ",\"samples_per_node\":" << c.samples_per_node << ",\"clusters\":" << c.clusters
        << ",\"keep_children\":" << c.keep_children << ",\"series_dim\":" << c.series_dim
        << ",\"master_seed\":" << c.master_seed << "},\"nodes\":[";
    for (const auto& n : tree.nodes()) {
        if (n.id != 0) {
            out << ",";
        }
        out << "\n{\"id\":" << n.id << ",\"parent_id\":";
        if (n.parent_id) {
            out << *n.parent_id;
        } else {
            out << "null";
        }
        out << ",\"stage\":" << n.stage << ",\"branch_prob\":" << num17(n.branch_prob)
            << ",\"path_prob\":" << num17(n.path_prob) << ",\"forecast\":[";
        for (std::size_t r = 0; r < n.forecast.rows(); ++r) {
            out << (r ? ",[" : "[");
            for (std::size_t k = 0; k < n.forecast.cols(); ++k) {
                out << (k ? "," : "") << num17(n.forecast(r, k));
            }
            out << "]";
        }
        out << "]}";
    }
    out << "\n]}\n";
    return out.str();
}

ScenarioTree tree_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("tree json: ") + e.what());
    }
    try {
        const auto& jc = doc.at("config");
        TreeConfig cfg;
        cfg.depth = jc.at("depth").get<std::size_t>();
        cfg.stage_horizon = jc.at("stage_horizon").get<std::size_t>();
        cfg.samples_per_node = jc.at("samples_per_node").get<std::size_t>();
        cfg.clusters = jc.at("clusters").get<std::size_t>();
        cfg.keep_children = jc.at("keep_children").get<std::size_t>();
        cfg.series_dim = jc.at("series_dim").get<std::size_t>();
        cfg.master_seed = jc.at("master_seed").get<std::uint64_t>();

        const auto& nodes = doc.at("nodes");
        if (!nodes.is_array() || nodes.empty()) {
            throw InvalidInput("tree json: no nodes");
        }
        auto read_block = [](const nlohmann::json& j) {
            return Matrix::from_rows(j.get<std::vector<std::vector<double>>>());
        };
        ScenarioTree tree(cfg, read_block(nodes.front().at("forecast")));
        for (std::size_t i = 1; i < nodes.size(); ++i) {
            const auto& jn = nodes[i];
            if (jn.at("id").get<std::size_t>() != i || jn.at("parent_id").is_null()) {
                throw InvalidInput("tree json: nodes must be listed in id order");
            }
            tree.add_child(jn.at("parent_id").get<std::size_t>(), read_block(jn.at("forecast")),
                           jn.at("branch_prob").get<double>());
        }
        tree.validate();
        return tree;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("tree json: ") + e.what());
    }
}

}  // namespace dst
