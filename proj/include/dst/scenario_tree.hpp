#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dst/common.hpp"
#include "dst/sampler.hpp"

namespace dst {

using NodeId = std::size_t;

struct TreeConfig {
    std::size_t depth = 3;             // number of branching stages below the root
    std::size_t stage_horizon = 24;    // hours per stage
    std::size_t samples_per_node = 256;
    std::size_t clusters = 4;
    std::size_t keep_children = 2;
    std::size_t series_dim = 1;
    std::uint64_t master_seed = 0;

    /// Throws InvalidInput when a count is zero.
    void validate() const;

    friend bool operator==(const TreeConfig&, const TreeConfig&) = default;
};

struct ScenarioNode {
    NodeId id = 0;
    std::optional<NodeId> parent_id;
    std::size_t stage = 0;
    Matrix forecast;  // stage_horizon x series_dim
    double branch_prob = 1.0;
    double path_prob = 1.0;
    std::vector<NodeId> children;

    friend bool operator==(const ScenarioNode&, const ScenarioNode&) = default;
};

/// Rooted tree of forecast blocks. Node ids equal their index in nodes().
class ScenarioTree {
public:
    ScenarioTree() = default;

    /// Tree with only a root carrying the realized current block.
    ScenarioTree(TreeConfig config, Matrix root_block);

    /// Appends a child; path_prob is derived from the parent.
    NodeId add_child(NodeId parent, Matrix forecast, double branch_prob);

    const TreeConfig& config() const { return config_; }
    const std::vector<ScenarioNode>& nodes() const { return nodes_; }
    const ScenarioNode& node(NodeId id) const { return nodes_.at(id); }
    const ScenarioNode& root() const { return nodes_.front(); }
    NodeId root_id() const { return 0; }
    std::size_t size() const { return nodes_.size(); }

    /// Deepest stage present.
    std::size_t max_stage() const;
    std::vector<NodeId> nodes_at_stage(std::size_t stage) const;
    std::vector<NodeId> leaves() const;

    /// Root-to-node id sequence.
    std::vector<NodeId> path_to(NodeId id) const;

    /// Checks structural and probability invariants; throws InvalidInput.
    void validate(double tol = 1e-9) const;

    friend bool operator==(const ScenarioTree&, const ScenarioTree&) = default;

private:
    TreeConfig config_;
    std::vector<ScenarioNode> nodes_;
};

struct Candidate {
    NodeId id = 0;
    double prob = 0.0;
};

/// Keeps the min(keep, n) most probable candidates (ties to lower id), in
/// descending order, with probabilities rescaled to sum to one.
std::vector<Candidate> prune_and_renormalize(std::vector<Candidate> children, std::size_t keep);

struct BuildOptions {
    /// Nodes of one stage are expanded on up to this many threads.
    std::size_t workers = 1;
};

/// Breadth-first scenario tree construction.
///
/// The root's forecast is the last stage_horizon rows of `history` (the
/// realized current block). Each node below `depth` draws
/// samples_per_node blocks conditioned on its own path history, clusters
/// them, keeps the top keep_children clusters and conditions each child on
/// the history extended by its centroid. The sampling and clustering seed
/// of a node depends only on (master_seed, node id).
ScenarioTree build_tree(const TrajectorySampler& sampler, const Matrix& history,
                        const TreeConfig& config, const BuildOptions& options = {});

/// path_prob of every node at `stage`.
std::map<NodeId, double> stage_probabilities(const ScenarioTree& tree, std::size_t stage);

/// Graphviz rendering, one statement per node (id order) and per edge.
std::string export_dot(const ScenarioTree& tree);

/// JSON document with probabilities and forecasts in 17 significant digits.
std::string tree_to_json(const ScenarioTree& tree);
ScenarioTree tree_from_json(const std::string& text);

}  // namespace dst
