#include "dst/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

namespace dst {
namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

// Indices of the first occurrence of each distinct row.
std::vector<std::size_t> distinct_rows(const Matrix& points) {
    std::map<std::vector<double>, std::size_t> seen;
    std::vector<std::size_t> firsts;
    for (std::size_t i = 0; i < points.rows(); ++i) {
        auto r = points.row(i);
        auto [it, inserted] = seen.emplace(std::vector<double>(r.begin(), r.end()), i);
        if (inserted) {
            firsts.push_back(i);
        }
    }
    return firsts;
}

std::size_t nearest(const Matrix& centroids, std::span<const double> p, double* dist = nullptr) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < centroids.rows(); ++j) {
        const double d = squared_distance(centroids.row(j), p);
        if (d < best_d) {  // strict: ties stay with the lower index
            best_d = d;
            best = j;
        }
    }
    if (dist != nullptr) {
        *dist = best_d;
    }
    return best;
}

ClusterResult one_cluster_per_distinct(const Matrix& points, const std::vector<std::size_t>& firsts) {
    ClusterResult out;
    out.k_eff = firsts.size();
    out.centroids = Matrix(out.k_eff, points.cols());
    out.sizes.assign(out.k_eff, 0);
    out.labels.resize(points.rows());
    for (std::size_t j = 0; j < firsts.size(); ++j) {
        auto src = points.row(firsts[j]);
        std::copy(src.begin(), src.end(), out.centroids.row(j).begin());
    }
    for (std::size_t i = 0; i < points.rows(); ++i) {
        // exact match exists, so the nearest centroid is at distance zero
        out.labels[i] = nearest(out.centroids, points.row(i));
        ++out.sizes[out.labels[i]];
    }
    out.wcss_trace.push_back(0.0);
    return out;
}

Matrix plus_plus_init(const Matrix& points, std::size_t k, std::mt19937_64& rng) {
    const std::size_t n = points.rows();
    Matrix centroids(k, points.cols());
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::size_t first = pick(rng);
    std::copy(points.row(first).begin(), points.row(first).end(), centroids.row(0).begin());

    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) {
        d2[i] = squared_distance(points.row(i), centroids.row(0));
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (double v : d2) {
            total += v;
        }
        const double target = unit(rng) * total;
        std::size_t chosen = n;
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (d2[i] <= 0.0) {
                continue;
            }
            acc += d2[i];
            chosen = i;
            if (acc >= target) {
                break;
            }
        }
        std::copy(points.row(chosen).begin(), points.row(chosen).end(), centroids.row(c).begin());
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], squared_distance(points.row(i), centroids.row(c)));
        }
    }
    return centroids;
}

}  // namespace

double within_cluster_ss(const Matrix& points, const std::vector<std::size_t>& labels,
                         const Matrix& centroids) {
    double s = 0.0;
    for (std::size_t i = 0; i < points.rows(); ++i) {
        s += squared_distance(points.row(i), centroids.row(labels[i]));
    }
    return s;
}

ClusterResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                     const KMeansOptions& options) {
    if (points.rows() == 0 || points.cols() == 0) {
        throw InvalidInput("kmeans: empty point set");
    }
    if (k == 0) {
        throw InvalidInput("kmeans: k must be positive");
    }
    if (!points.all_finite()) {
        throw InvalidInput("kmeans: non-finite input");
    }

    const auto firsts = distinct_rows(points);
    if (firsts.size() <= k) {
        return one_cluster_per_distinct(points, firsts);
    }

    const std::size_t n = points.rows();
    const std::size_t dim = points.cols();
    std::mt19937_64 rng(seed);
    Matrix centroids = plus_plus_init(points, k, rng);

    ClusterResult out;
    out.labels.assign(n, 0);
    out.sizes.assign(k, 0);

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        // assignment
        std::vector<double> dist(n);
        std::fill(out.sizes.begin(), out.sizes.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            out.labels[i] = nearest(centroids, points.row(i), &dist[i]);
            ++out.sizes[out.labels[i]];
        }
        // reseed empty clusters with the worst-served point
        for (std::size_t j = 0; j < k; ++j) {
            if (out.sizes[j] != 0) {
                continue;
            }
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (out.sizes[out.labels[i]] > 1 && dist[i] > far_d) {
                    far_d = dist[i];
                    far = i;
                }
            }
            --out.sizes[out.labels[far]];
            out.labels[far] = j;
            out.sizes[j] = 1;
            dist[far] = 0.0;
        }
        // update
        Matrix next(k, dim);
        for (std::size_t i = 0; i < n; ++i) {
            auto dst_row = next.row(out.labels[i]);
            auto src = points.row(i);
            for (std::size_t c = 0; c < dim; ++c) {
                dst_row[c] += src[c];
            }
        }
        double shift = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const double inv = 1.0 / static_cast<double>(out.sizes[j]);
            for (std::size_t c = 0; c < dim; ++c) {
                next(j, c) *= inv;
            }
            shift = std::max(shift, std::sqrt(squared_distance(next.row(j), centroids.row(j))));
        }
        centroids = std::move(next);
        out.iterations = iter + 1;
        out.wcss_trace.push_back(within_cluster_ss(points, out.labels, centroids));
        if (shift < options.shift_tolerance) {
            break;
        }
    }

    out.centroids = std::move(centroids);
    out.k_eff = k;
    return out;
}

}  // namespace dst
