#pragma once

#include <vector>

#include "dst/sampler.hpp"

namespace dst {

struct GaussianARParams {
    Matrix transition;               // D x D
    std::vector<double> intercept;   // D
    std::vector<double> noise_scale; // D, >= 0
};

/// Largest eigenvalue modulus of a square matrix.
double spectral_radius(const Matrix& a);

/// Per-column AR(1) fitted by least squares: diagonal A, with each
/// coefficient clipped to [-0.99, 0.99], and residual standard deviations.
/// Needs at least three rows.
GaussianARParams fit_gaussian_ar(const Matrix& series);

/// x_{t+1} = c + A x_t + eps_t with independent Gaussian noise, rolled from
/// the last history row.
class GaussianARSampler final : public TrajectorySampler {
public:
    /// Throws InvalidInput unless A is square, stationary (spectral radius
    /// below 1) and all vectors match its dimension.
    explicit GaussianARSampler(GaussianARParams params);

    std::string name() const override { return "gaussian_ar"; }
    std::size_t dim() const override { return params_.intercept.size(); }
    std::unique_ptr<TrajectorySampler> clone() const override;
    TrajectoryBatch sample(const SamplerRequest& req) const override;

    const GaussianARParams& params() const { return params_; }

private:
    GaussianARParams params_;
};

struct RegimeMixtureParams {
    std::vector<double> weights;              // R, positive, sums to 1
    std::vector<std::vector<double>> drifts;  // R x D, per-step drift
    double noise_scale = 0.0;
};

/// Per sample, draws a regime then emits last_row + drift * step + noise.
class RegimeMixtureSampler final : public TrajectorySampler {
public:
    explicit RegimeMixtureSampler(RegimeMixtureParams params);

    std::string name() const override { return "regime_mixture"; }
    std::size_t dim() const override { return params_.drifts.front().size(); }
    std::unique_ptr<TrajectorySampler> clone() const override;
    TrajectoryBatch sample(const SamplerRequest& req) const override;

    /// Regime index drawn for each of the m samples of `req`. Uses the same
    /// stream as sample(), so it reports exactly the regimes behind a batch.
    std::vector<std::size_t> regimes(const SamplerRequest& req) const;

    const RegimeMixtureParams& params() const { return params_; }

private:
    RegimeMixtureParams params_;
};

struct SeasonalRegimeParams {
    std::vector<double> weights;   // R, positive, sums to 1
    std::vector<Matrix> profiles;  // R blocks of P x D, one period each
    double noise_scale = 0.0;
};

/// Per sample, draws a regime and emits its periodic profile plus noise.
/// Row t of a sample is profile row (T + t) mod P for a history of T rows,
/// so blocks stay in phase with the absolute hour.
class SeasonalRegimeSampler final : public TrajectorySampler {
public:
    explicit SeasonalRegimeSampler(SeasonalRegimeParams params);

    std::string name() const override { return "seasonal_regime"; }
    std::size_t dim() const override { return params_.profiles.front().cols(); }
    std::unique_ptr<TrajectorySampler> clone() const override;
    TrajectoryBatch sample(const SamplerRequest& req) const override;

    const SeasonalRegimeParams& params() const { return params_; }

private:
    SeasonalRegimeParams params_;
};

/// Resamples whole historical h x D blocks uniformly with replacement.
class BootstrapSampler final : public TrajectorySampler {
public:
    explicit BootstrapSampler(std::vector<Matrix> corpus);

    /// Cuts a series into consecutive non-overlapping blocks of `h` rows.
    static std::vector<Matrix> blocks_from_series(const Matrix& series, std::size_t h);

    std::string name() const override { return "bootstrap"; }
    std::size_t dim() const override { return corpus_.front().cols(); }
    std::unique_ptr<TrajectorySampler> clone() const override;
    TrajectoryBatch sample(const SamplerRequest& req) const override;

    /// Corpus index drawn for each sample.
    std::vector<std::size_t> picks(const SamplerRequest& req) const;

private:
    std::vector<Matrix> corpus_;
};

/// Zero-variance sampler that replays a known series: given a history of
/// T rows it returns rows [T, T+h) of the series in every sample. Assumes
/// the history is a prefix of the series (its length is all that is used).
class ReplaySampler final : public TrajectorySampler {
public:
    explicit ReplaySampler(Matrix series);

    std::string name() const override { return "replay"; }
    std::size_t dim() const override { return series_.cols(); }
    std::unique_ptr<TrajectorySampler> clone() const override;
    TrajectoryBatch sample(const SamplerRequest& req) const override;

private:
    Matrix series_;
};

/// Zero-variance sampler that always returns the same block (tiled or
/// truncated to h rows).
class ConstantSampler final : public TrajectorySampler {
public:
    explicit ConstantSampler(Matrix block);

    std::string name() const override { return "constant"; }
    std::size_t dim() const override { return block_.cols(); }
    std::unique_ptr<TrajectorySampler> clone() const override;
    TrajectoryBatch sample(const SamplerRequest& req) const override;

private:
    Matrix block_;
};

}  // namespace dst
