#include "dst/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dst {

Matrix TrajectoryBatch::sample(std::size_t i) const {
    Matrix out(h_, d_);
    const auto begin = values_.begin() + static_cast<std::ptrdiff_t>(i * h_ * d_);
    std::copy(begin, begin + static_cast<std::ptrdiff_t>(h_ * d_), out.data().begin());
    return out;
}

Matrix TrajectoryBatch::flattened() const {
    return Matrix(m_, h_ * d_, values_);
}

void validate_request(const SamplerRequest& req, std::size_t dim, std::size_t min_context) {
    if (req.m == 0 || req.h == 0) {
        throw InvalidInput("sampler request needs m >= 1 and h >= 1");
    }
    if (req.history.cols() != dim) {
        throw InvalidInput("history has " + std::to_string(req.history.cols()) +
                           " columns, sampler expects " + std::to_string(dim));
    }
    if (req.history.rows() < std::max<std::size_t>(min_context, 1)) {
        throw InvalidInput("history has " + std::to_string(req.history.rows()) +
                           " rows, sampler needs at least " + std::to_string(min_context));
    }
    if (!req.history.all_finite()) {
        throw InvalidInput("history contains non-finite values");
    }
}

void validate_batch(const TrajectoryBatch& batch, std::size_t m, std::size_t h, std::size_t d) {
    if (batch.m() != m || batch.h() != h || batch.d() != d) {
        throw ProtocolError("batch shape (" + std::to_string(batch.m()) + "," +
                            std::to_string(batch.h()) + "," + std::to_string(batch.d()) +
                            ") does not match request (" + std::to_string(m) + "," +
                            std::to_string(h) + "," + std::to_string(d) + ")");
    }
    for (double v : batch.values()) {
        if (!std::isfinite(v)) {
            throw ProtocolError("batch contains non-finite values");
        }
    }
}

std::vector<Matrix> rollout_trajectories(const TrajectorySampler& sampler, const Matrix& history,
                                         std::size_t count, std::size_t h, std::size_t stages,
                                         std::uint64_t seed) {
    std::vector<Matrix> paths(count);
    if (stages == 0 || count == 0) {
        for (auto& p : paths) {
            p = Matrix(0, history.cols());
        }
        return paths;
    }
    SamplerRequest first{history, count, h, mix_seed(seed, 0)};
    const TrajectoryBatch batch = sampler.sample(first);
    validate_batch(batch, count, h, sampler.dim());
    for (std::size_t i = 0; i < count; ++i) {
        paths[i] = batch.sample(i);
    }
    for (std::size_t stage = 1; stage < stages; ++stage) {
        for (std::size_t i = 0; i < count; ++i) {
            Matrix ctx = history;
            ctx.append_rows(paths[i]);
            SamplerRequest req{std::move(ctx), 1, h, mix_seed(seed, stage * count + i + 1)};
            const TrajectoryBatch next = sampler.sample(req);
            validate_batch(next, 1, h, sampler.dim());
            paths[i].append_rows(next.sample(0));
        }
    }
    return paths;
}

}  // namespace dst
