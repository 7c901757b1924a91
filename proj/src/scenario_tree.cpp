#include "dst/scenario_tree.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <memory>
#include <thread>

#include "dst/kmeans.hpp"

namespace dst {

void TreeConfig::validate() const {
    if (depth == 0 || stage_horizon == 0 || samples_per_node == 0 || clusters == 0 ||
        keep_children == 0 || series_dim == 0) {
        throw InvalidInput("tree config: all counts must be positive");
    }
}

ScenarioTree::ScenarioTree(TreeConfig config, Matrix root_block) : config_(config) {
    ScenarioNode root;
    root.forecast = std::move(root_block);
    nodes_.push_back(std::move(root));
}

NodeId ScenarioTree::add_child(NodeId parent, Matrix forecast, double branch_prob) {
    if (parent >= nodes_.size()) {
        throw InvalidInput("add_child: unknown parent " + std::to_string(parent));
    }
    if (!(branch_prob > 0.0 && branch_prob <= 1.0)) {
        throw InvalidInput("add_child: branch probability must lie in (0, 1]");
    }
    ScenarioNode child;
    child.id = nodes_.size();
    child.parent_id = parent;
    child.stage = nodes_[parent].stage + 1;
    child.forecast = std::move(forecast);
    child.branch_prob = branch_prob;
    child.path_prob = nodes_[parent].path_prob * branch_prob;
    nodes_[parent].children.push_back(child.id);
    nodes_.push_back(std::move(child));
    return nodes_.back().id;
}

std::size_t ScenarioTree::max_stage() const {
    std::size_t s = 0;
    for (const auto& n : nodes_) {
        s = std::max(s, n.stage);
    }
    return s;
}

std::vector<NodeId> ScenarioTree::nodes_at_stage(std::size_t stage) const {
    std::vector<NodeId> out;
    for (const auto& n : nodes_) {
        if (n.stage == stage) {
            out.push_back(n.id);
        }
    }
    return out;
}

std::vector<NodeId> ScenarioTree::leaves() const {
    std::vector<NodeId> out;
    for (const auto& n : nodes_) {
        if (n.children.empty()) {
            out.push_back(n.id);
        }
    }
    return out;
}

std::vector<NodeId> ScenarioTree::path_to(NodeId id) const {
    std::vector<NodeId> path;
    std::optional<NodeId> cur = id;
    while (cur) {
        path.push_back(*cur);
        cur = nodes_.at(*cur).parent_id;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

void ScenarioTree::validate(double tol) const {
    if (nodes_.empty()) {
        throw InvalidInput("tree has no root");
    }
    const auto& r = nodes_.front();
    if (r.parent_id || r.stage != 0 || r.branch_prob != 1.0 || r.path_prob != 1.0) {
        throw InvalidInput("malformed root node");
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& n = nodes_[i];
        if (n.id != i) {
            throw InvalidInput("node ids must equal their position");
        }
        if (n.forecast.rows() != config_.stage_horizon || n.forecast.cols() != config_.series_dim) {
            throw InvalidInput("node " + std::to_string(i) + " forecast has the wrong shape");
        }
        if (i > 0) {
            if (!n.parent_id || *n.parent_id >= i) {
                throw InvalidInput("node " + std::to_string(i) + " parent must precede it");
            }
            const auto& p = nodes_[*n.parent_id];
            if (n.stage != p.stage + 1) {
                throw InvalidInput("node " + std::to_string(i) + " stage mismatch");
            }
            if (std::find(p.children.begin(), p.children.end(), i) == p.children.end()) {
                throw InvalidInput("node " + std::to_string(i) + " missing from parent's children");
            }
            if (!(n.branch_prob > 0.0 && n.branch_prob <= 1.0)) {
                throw InvalidInput("node " + std::to_string(i) + " branch probability out of range");
            }
            if (std::abs(n.path_prob - p.path_prob * n.branch_prob) > 1e-12) {
                throw InvalidInput("node " + std::to_string(i) + " path probability inconsistent");
            }
        }
        if (!n.children.empty()) {
            double sum = 0.0;
            for (NodeId c : n.children) {
                if (c >= nodes_.size() || nodes_[c].parent_id != i) {
                    throw InvalidInput("node " + std::to_string(i) + " lists a foreign child");
                }
                sum += nodes_[c].branch_prob;
            }
            if (std::abs(sum - 1.0) > tol) {
                throw InvalidInput("children of node " + std::to_string(i) + " do not sum to one");
            }
        }
    }
    // Stage sums only hold on stages every root path reaches.
    std::size_t full_depth = max_stage();
    for (const auto& n : nodes_) {
        if (n.children.empty()) {
            full_depth = std::min(full_depth, n.stage);
        }
    }
    for (std::size_t s = 0; s <= full_depth; ++s) {
        double sum = 0.0;
        for (NodeId id : nodes_at_stage(s)) {
            sum += nodes_[id].path_prob;
        }
        if (std::abs(sum - 1.0) > tol) {
            throw InvalidInput("stage " + std::to_string(s) + " probabilities do not sum to one");
        }
    }
}

std::vector<Candidate> prune_and_renormalize(std::vector<Candidate> children, std::size_t keep) {
    if (keep == 0) {
        throw InvalidInput("prune: keep must be positive");
    }
    if (children.empty()) {
        throw InvalidInput("prune: no children");
    }
    for (const auto& c : children) {
        if (!(c.prob > 0.0)) {
            throw InvalidInput("prune: probabilities must be positive");
        }
    }
    std::sort(children.begin(), children.end(), [](const Candidate& a, const Candidate& b) {
        if (a.prob != b.prob) {
            return a.prob > b.prob;
        }
        return a.id < b.id;
    });
    children.resize(std::min(keep, children.size()));
    double total = 0.0;
    for (const auto& c : children) {
        total += c.prob;
    }
    for (auto& c : children) {
        c.prob /= total;
    }
    return children;
}

namespace {

struct Expansion {
    std::vector<Matrix> forecasts;
    std::vector<double> branch_probs;
};

struct Frontier {
    NodeId id;
    Matrix history;
};

[[noreturn]] void rethrow_tagged(NodeId id) {
    const std::string tag = "node " + std::to_string(id) + ": ";
    try {
        throw;
    } catch (const TimeoutError& e) {
        throw TimeoutError(tag + e.what());
    } catch (const RemoteError& e) {
        throw RemoteError(tag + e.what());
    } catch (const ProtocolError& e) {
        throw ProtocolError(tag + e.what());
    } catch (const SamplerError& e) {
        throw SamplerError(tag + e.what());
    } catch (const InvalidInput& e) {
        throw InvalidInput(tag + e.what());
    } catch (const std::exception& e) {
        throw SamplerError(tag + e.what());
    }
}

Expansion expand(const TrajectorySampler& sampler, const Frontier& node, double path_prob,
                 const TreeConfig& cfg) {
    const std::size_t h = cfg.stage_horizon;
    const std::size_t d = cfg.series_dim;
    TrajectoryBatch batch;
    try {
        SamplerRequest req{node.history, cfg.samples_per_node, h, mix_seed(cfg.master_seed, 2 * node.id)};
        batch = sampler.sample(req);
        validate_batch(batch, cfg.samples_per_node, h, d);
    } catch (...) {
        rethrow_tagged(node.id);
    }

    const ClusterResult clusters =
        kmeans(batch.flattened(), cfg.clusters, mix_seed(cfg.master_seed, 2 * node.id + 1));

    std::vector<Candidate> candidates;
    const double m = static_cast<double>(cfg.samples_per_node);
    for (std::size_t k = 0; k < clusters.k_eff; ++k) {
        candidates.push_back({k, path_prob * (static_cast<double>(clusters.sizes[k]) / m)});
    }
    const auto kept = prune_and_renormalize(std::move(candidates), cfg.keep_children);

    Expansion out;
    for (const auto& c : kept) {
        auto row = clusters.centroids.row(c.id);
        out.forecasts.emplace_back(h, d, std::vector<double>(row.begin(), row.end()));
        out.branch_probs.push_back(c.prob);
    }
    return out;
}

}  // namespace

ScenarioTree build_tree(const TrajectorySampler& sampler, const Matrix& history,
                        const TreeConfig& config, const BuildOptions& options) {
    config.validate();
    if (sampler.dim() != config.series_dim) {
        throw InvalidInput("sampler dimension does not match series_dim");
    }
    if (history.cols() != config.series_dim) {
        throw InvalidInput("history dimension does not match series_dim");
    }
    if (history.rows() < std::max<std::size_t>({config.stage_horizon, sampler.min_context(), 1})) {
        throw InvalidInput("history is shorter than the stage horizon or the sampler's context");
    }
    if (!history.all_finite()) {
        throw InvalidInput("history contains non-finite values");
    }

    ScenarioTree tree(config, history.slice_rows(history.rows() - config.stage_horizon,
                                                 config.stage_horizon));
    std::vector<Frontier> frontier{{0, history}};

    const std::size_t workers = std::max<std::size_t>(options.workers, 1);
    std::vector<std::unique_ptr<TrajectorySampler>> clones;
    if (workers > 1 && !sampler.thread_safe()) {
        for (std::size_t w = 0; w < workers; ++w) {
            clones.push_back(sampler.clone());
        }
    }

    for (std::size_t stage = 0; stage < config.depth; ++stage) {
        std::vector<Expansion> results(frontier.size());
        auto run_one = [&](const TrajectorySampler& s, std::size_t i) {
            results[i] = expand(s, frontier[i], tree.node(frontier[i].id).path_prob, config);
        };

        if (workers == 1 || frontier.size() == 1) {
            for (std::size_t i = 0; i < frontier.size(); ++i) {
                run_one(sampler, i);
            }
        } else {
            std::atomic<std::size_t> next{0};
            std::vector<std::exception_ptr> errors(frontier.size());
            std::vector<std::thread> pool;
            const std::size_t n_threads = std::min(workers, frontier.size());
            for (std::size_t w = 0; w < n_threads; ++w) {
                pool.emplace_back([&, w] {
                    const TrajectorySampler& s = clones.empty() ? sampler : *clones[w];
                    for (std::size_t i = next++; i < frontier.size(); i = next++) {
                        try {
                            run_one(s, i);
                        } catch (...) {
                            errors[i] = std::current_exception();
                        }
                    }
                });
            }
            for (auto& t : pool) {
                t.join();
            }
            for (const auto& e : errors) {
                if (e) {
                    std::rethrow_exception(e);
                }
            }
        }

        // Ids are handed out in frontier order, which is the BFS dequeue order.
        std::vector<Frontier> next_frontier;
        for (std::size_t i = 0; i < frontier.size(); ++i) {
            auto& ex = results[i];
            for (std::size_t c = 0; c < ex.forecasts.size(); ++c) {
                Matrix child_history = frontier[i].history;
                child_history.append_rows(ex.forecasts[c]);
                const NodeId id = tree.add_child(frontier[i].id, std::move(ex.forecasts[c]),
                                                 ex.branch_probs[c]);
                next_frontier.push_back({id, std::move(child_history)});
            }
        }
        frontier = std::move(next_frontier);
    }
    return tree;
}

std::map<NodeId, double> stage_probabilities(const ScenarioTree& tree, std::size_t stage) {
    if (stage > tree.config().depth) {
        throw InvalidInput("stage " + std::to_string(stage) + " is beyond the tree depth");
    }
    std::map<NodeId, double> out;
    for (NodeId id : tree.nodes_at_stage(stage)) {
        out.emplace(id, tree.node(id).path_prob);
    }
    return out;
}

}  // namespace dst
