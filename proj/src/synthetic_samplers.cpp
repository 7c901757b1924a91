#include "dst/synthetic_samplers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

namespace dst {

double spectral_radius(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw InvalidInput("spectral_radius: matrix must be square");
    }
    if (a.rows() == 0) {
        return 0.0;
    }
    Eigen::MatrixXd m(a.rows(), a.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = a(r, c);
        }
    }
    Eigen::EigenSolver<Eigen::MatrixXd> solver(m, false);
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

GaussianARParams fit_gaussian_ar(const Matrix& series) {
    const std::size_t n = series.rows();
    const std::size_t d = series.cols();
    if (n < 3 || d == 0) {
        throw InvalidInput("fit_gaussian_ar: need at least three rows");
    }
    GaussianARParams p{Matrix(d, d, 0.0), std::vector<double>(d), std::vector<double>(d)};
    for (std::size_t k = 0; k < d; ++k) {
        double mx = 0, my = 0;
        for (std::size_t t = 0; t + 1 < n; ++t) {
            mx += series(t, k);
            my += series(t + 1, k);
        }
        mx /= static_cast<double>(n - 1);
        my /= static_cast<double>(n - 1);
        double sxy = 0, sxx = 0;
        for (std::size_t t = 0; t + 1 < n; ++t) {
            sxy += (series(t, k) - mx) * (series(t + 1, k) - my);
            sxx += (series(t, k) - mx) * (series(t, k) - mx);
        }
        const double a = sxx > 0 ? std::clamp(sxy / sxx, -0.99, 0.99) : 0.0;
        const double c = my - a * mx;
        double rss = 0;
        for (std::size_t t = 0; t + 1 < n; ++t) {
            const double r = series(t + 1, k) - c - a * series(t, k);
            rss += r * r;
        }
        p.transition(k, k) = a;
        p.intercept[k] = c;
        p.noise_scale[k] = std::sqrt(rss / static_cast<double>(n - 1));
    }
    return p;
}

// ---------------------------------------------------------------------------

GaussianARSampler::GaussianARSampler(GaussianARParams params) : params_(std::move(params)) {
    const std::size_t d = params_.intercept.size();
    if (d == 0) {
        throw InvalidInput("gaussian_ar: empty intercept");
    }
    if (params_.transition.rows() != d || params_.transition.cols() != d ||
        params_.noise_scale.size() != d) {
        throw InvalidInput("gaussian_ar: parameter dimensions disagree");
    }
    for (double s : params_.noise_scale) {
        if (!(s >= 0.0)) {
            throw InvalidInput("gaussian_ar: noise scale must be non-negative");
        }
    }
    if (!params_.transition.all_finite() || spectral_radius(params_.transition) >= 1.0) {
        throw InvalidInput("gaussian_ar: transition matrix is not stationary");
    }
}

std::unique_ptr<TrajectorySampler> GaussianARSampler::clone() const {
    return std::make_unique<GaussianARSampler>(*this);
}

TrajectoryBatch GaussianARSampler::sample(const SamplerRequest& req) const {
    const std::size_t d = dim();
    validate_request(req, d, min_context());
    TrajectoryBatch out(req.m, req.h, d);
    std::mt19937_64 rng(req.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto last = req.history.row(req.history.rows() - 1);
    std::vector<double> x(d), next(d);
    for (std::size_t i = 0; i < req.m; ++i) {
        x.assign(last.begin(), last.end());
        for (std::size_t t = 0; t < req.h; ++t) {
            for (std::size_t r = 0; r < d; ++r) {
                double v = params_.intercept[r];
                for (std::size_t c = 0; c < d; ++c) {
                    v += params_.transition(r, c) * x[c];
                }
                next[r] = v + params_.noise_scale[r] * normal(rng);
            }
            x.swap(next);
            for (std::size_t r = 0; r < d; ++r) {
                out.at(i, t, r) = x[r];
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

RegimeMixtureSampler::RegimeMixtureSampler(RegimeMixtureParams params) : params_(std::move(params)) {
    if (params_.weights.empty() || params_.weights.size() != params_.drifts.size()) {
        throw InvalidInput("regime_mixture: need one drift vector per weight");
    }
    double total = 0.0;
    for (double w : params_.weights) {
        if (!(w > 0.0)) {
            throw InvalidInput("regime_mixture: weights must be positive");
        }
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw InvalidInput("regime_mixture: weights must sum to 1");
    }
    const std::size_t d = params_.drifts.front().size();
    if (d == 0) {
        throw InvalidInput("regime_mixture: empty drift vector");
    }
    for (const auto& drift : params_.drifts) {
        if (drift.size() != d) {
            throw InvalidInput("regime_mixture: drift vectors differ in length");
        }
    }
    if (!(params_.noise_scale >= 0.0)) {
        throw InvalidInput("regime_mixture: noise scale must be non-negative");
    }
}

std::unique_ptr<TrajectorySampler> RegimeMixtureSampler::clone() const {
    return std::make_unique<RegimeMixtureSampler>(*this);
}

namespace {

std::size_t draw_regime(const std::vector<double>& weights, double u) {
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < weights.size(); ++j) {
        acc += weights[j];
        if (u < acc) {
            return j;
        }
    }
    return weights.size() - 1;
}

}  // namespace

TrajectoryBatch RegimeMixtureSampler::sample(const SamplerRequest& req) const {
    const std::size_t d = dim();
    validate_request(req, d, min_context());
    TrajectoryBatch out(req.m, req.h, d);
    std::mt19937_64 rng(req.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto last = req.history.row(req.history.rows() - 1);
    for (std::size_t i = 0; i < req.m; ++i) {
        const auto& drift = params_.drifts[draw_regime(params_.weights, unit(rng))];
        for (std::size_t t = 0; t < req.h; ++t) {
            const double step = static_cast<double>(t + 1);
            for (std::size_t r = 0; r < d; ++r) {
                out.at(i, t, r) = last[r] + drift[r] * step + params_.noise_scale * normal(rng);
            }
        }
    }
    return out;
}

std::vector<std::size_t> RegimeMixtureSampler::regimes(const SamplerRequest& req) const {
    validate_request(req, dim(), min_context());
    std::mt19937_64 rng(req.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::size_t> out(req.m);
    for (std::size_t i = 0; i < req.m; ++i) {
        out[i] = draw_regime(params_.weights, unit(rng));
        for (std::size_t k = 0; k < req.h * dim(); ++k) {
            (void)normal(rng);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

void check_weights(const std::vector<double>& weights, const char* who) {
    double total = 0.0;
    for (double w : weights) {
        if (!(w > 0.0)) {
            throw InvalidInput(std::string(who) + ": weights must be positive");
        }
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw InvalidInput(std::string(who) + ": weights must sum to 1");
    }
}

}  // namespace

SeasonalRegimeSampler::SeasonalRegimeSampler(SeasonalRegimeParams params) : params_(std::move(params)) {
    if (params_.weights.empty() || params_.weights.size() != params_.profiles.size()) {
        throw InvalidInput("seasonal_regime: need one profile per weight");
    }
    check_weights(params_.weights, "seasonal_regime");
    const auto& first = params_.profiles.front();
    if (first.rows() == 0 || first.cols() == 0) {
        throw InvalidInput("seasonal_regime: empty profile");
    }
    for (const auto& p : params_.profiles) {
        if (p.rows() != first.rows() || p.cols() != first.cols()) {
            throw InvalidInput("seasonal_regime: profiles differ in shape");
        }
        if (!p.all_finite()) {
            throw InvalidInput("seasonal_regime: profile contains non-finite values");
        }
    }
    if (!(params_.noise_scale >= 0.0)) {
        throw InvalidInput("seasonal_regime: noise scale must be non-negative");
    }
}

std::unique_ptr<TrajectorySampler> SeasonalRegimeSampler::clone() const {
    return std::make_unique<SeasonalRegimeSampler>(*this);
}

TrajectoryBatch SeasonalRegimeSampler::sample(const SamplerRequest& req) const {
    const std::size_t d = dim();
    validate_request(req, d, min_context());
    TrajectoryBatch out(req.m, req.h, d);
    std::mt19937_64 rng(req.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t period = params_.profiles.front().rows();
    const std::size_t offset = req.history.rows() % period;
    for (std::size_t i = 0; i < req.m; ++i) {
        const Matrix& prof = params_.profiles[draw_regime(params_.weights, unit(rng))];
        for (std::size_t t = 0; t < req.h; ++t) {
            const std::size_t row = (offset + t) % period;
            for (std::size_t r = 0; r < d; ++r) {
                out.at(i, t, r) = prof(row, r) + params_.noise_scale * normal(rng);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

BootstrapSampler::BootstrapSampler(std::vector<Matrix> corpus) : corpus_(std::move(corpus)) {
    if (corpus_.empty()) {
        throw InvalidInput("bootstrap: empty corpus");
    }
    for (const auto& block : corpus_) {
        if (block.rows() != corpus_.front().rows() || block.cols() != corpus_.front().cols() ||
            block.empty()) {
            throw InvalidInput("bootstrap: corpus blocks differ in shape");
        }
        if (!block.all_finite()) {
            throw InvalidInput("bootstrap: corpus contains non-finite values");
        }
    }
}

std::vector<Matrix> BootstrapSampler::blocks_from_series(const Matrix& series, std::size_t h) {
    if (h == 0) {
        throw InvalidInput("bootstrap: block length must be positive");
    }
    std::vector<Matrix> blocks;
    for (std::size_t start = 0; start + h <= series.rows(); start += h) {
        blocks.push_back(series.slice_rows(start, h));
    }
    return blocks;
}

std::unique_ptr<TrajectorySampler> BootstrapSampler::clone() const {
    return std::make_unique<BootstrapSampler>(*this);
}

std::vector<std::size_t> BootstrapSampler::picks(const SamplerRequest& req) const {
    std::mt19937_64 rng(req.seed);
    std::uniform_int_distribution<std::size_t> pick(0, corpus_.size() - 1);
    std::vector<std::size_t> out(req.m);
    for (auto& p : out) {
        p = pick(rng);
    }
    return out;
}

TrajectoryBatch BootstrapSampler::sample(const SamplerRequest& req) const {
    validate_request(req, dim(), min_context());
    if (req.h != corpus_.front().rows()) {
        throw InvalidInput("bootstrap: request horizon " + std::to_string(req.h) +
                           " does not match block length " + std::to_string(corpus_.front().rows()));
    }
    TrajectoryBatch out(req.m, req.h, dim());
    const auto chosen = picks(req);
    for (std::size_t i = 0; i < req.m; ++i) {
        const Matrix& block = corpus_[chosen[i]];
        for (std::size_t t = 0; t < req.h; ++t) {
            for (std::size_t r = 0; r < dim(); ++r) {
                out.at(i, t, r) = block(t, r);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

ReplaySampler::ReplaySampler(Matrix series) : series_(std::move(series)) {
    if (series_.empty()) {
        throw InvalidInput("replay: empty series");
    }
}

std::unique_ptr<TrajectorySampler> ReplaySampler::clone() const {
    return std::make_unique<ReplaySampler>(*this);
}

TrajectoryBatch ReplaySampler::sample(const SamplerRequest& req) const {
    validate_request(req, dim(), min_context());
    const std::size_t start = req.history.rows();
    if (start + req.h > series_.rows()) {
        throw SamplerError("replay: request runs past the end of the recorded series");
    }
    TrajectoryBatch out(req.m, req.h, dim());
    for (std::size_t i = 0; i < req.m; ++i) {
        for (std::size_t t = 0; t < req.h; ++t) {
            for (std::size_t r = 0; r < dim(); ++r) {
                out.at(i, t, r) = series_(start + t, r);
            }
        }
    }
    return out;
}

ConstantSampler::ConstantSampler(Matrix block) : block_(std::move(block)) {
    if (block_.empty()) {
        throw InvalidInput("constant: empty block");
    }
}

std::unique_ptr<TrajectorySampler> ConstantSampler::clone() const {
    return std::make_unique<ConstantSampler>(*this);
}

TrajectoryBatch ConstantSampler::sample(const SamplerRequest& req) const {
    validate_request(req, dim(), min_context());
    TrajectoryBatch out(req.m, req.h, dim());
    for (std::size_t i = 0; i < req.m; ++i) {
        for (std::size_t t = 0; t < req.h; ++t) {
            for (std::size_t r = 0; r < dim(); ++r) {
                out.at(i, t, r) = block_(t % block_.rows(), r);
            }
        }
    }
    return out;
}

}  // namespace dst
