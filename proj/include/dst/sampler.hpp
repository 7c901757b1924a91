#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dst/common.hpp"

namespace dst {

struct SamplerRequest {
    Matrix history;  // T x D, most recent row last
    std::size_t m = 1;
    std::size_t h = 1;
    std::uint64_t seed = 0;
};

/// m draws of an h x D block.
class TrajectoryBatch {
public:
    TrajectoryBatch() = default;
    TrajectoryBatch(std::size_t m, std::size_t h, std::size_t d)
        : m_(m), h_(h), d_(d), values_(m * h * d, 0.0) {}

    std::size_t m() const { return m_; }
    std::size_t h() const { return h_; }
    std::size_t d() const { return d_; }

    double& at(std::size_t sample, std::size_t step, std::size_t dim) {
        return values_[(sample * h_ + step) * d_ + dim];
    }
    double at(std::size_t sample, std::size_t step, std::size_t dim) const {
        return values_[(sample * h_ + step) * d_ + dim];
    }

    /// Sample `i` as an h x D matrix.
    Matrix sample(std::size_t i) const;

    /// All samples flattened to m x (h*D), row-major within each sample.
    Matrix flattened() const;

    const std::vector<double>& values() const { return values_; }

    friend bool operator==(const TrajectoryBatch&, const TrajectoryBatch&) = default;

private:
    std::size_t m_ = 0;
    std::size_t h_ = 0;
    std::size_t d_ = 0;
    std::vector<double> values_;
};

/// Conditional trajectory generator: draws future blocks given a history.
///
/// Implementations must be deterministic in (request, seed). `sample` may be
/// called from several threads at once when `thread_safe()` is true;
/// otherwise callers use `clone()` to get one instance per worker.
class TrajectorySampler {
public:
    virtual ~TrajectorySampler() = default;

    virtual std::string name() const = 0;
    virtual std::size_t dim() const = 0;
    virtual std::size_t min_context() const { return 1; }
    virtual bool thread_safe() const { return true; }
    virtual std::unique_ptr<TrajectorySampler> clone() const = 0;

    virtual TrajectoryBatch sample(const SamplerRequest& req) const = 0;
};

/// Common request checks shared by all samplers.
void validate_request(const SamplerRequest& req, std::size_t dim, std::size_t min_context);

/// Shape and finiteness check on a returned batch.
void validate_batch(const TrajectoryBatch& batch, std::size_t m, std::size_t h, std::size_t d);

/// Rolls `stages` consecutive blocks of `h` hours forward for `count`
/// independent trajectories. The first block of every trajectory comes
/// from one shared request; each later block is conditioned on the
/// trajectory's own path. Returns count matrices of (stages*h) x D.
std::vector<Matrix> rollout_trajectories(const TrajectorySampler& sampler, const Matrix& history,
                                         std::size_t count, std::size_t h, std::size_t stages,
                                         std::uint64_t seed);

}  // namespace dst
