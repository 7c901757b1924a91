#pragma once

#include <cstdint>
#include <vector>

#include "dst/common.hpp"

namespace dst {

struct ClusterResult {
    std::vector<std::size_t> labels;   // one per input row, in [0, k_eff)
    Matrix centroids;                  // k_eff x cols
    std::vector<std::size_t> sizes;    // points per cluster, all >= 1
    std::size_t k_eff = 0;
    int iterations = 0;
    /// Within-cluster sum of squares after every Lloyd update.
    std::vector<double> wcss_trace;
};

struct KMeansOptions {
    int max_iterations = 100;
    double shift_tolerance = 1e-6;
};

/// Seeded k-means with k-means++ initialization and Lloyd refinement.
///
/// When the input holds fewer than `k` distinct rows, every distinct row
/// becomes its own cluster (in order of first appearance). Clusters that
/// empty out during refinement are reseeded with the point farthest from
/// its assigned centroid. Nearest-centroid ties go to the lowest index.
ClusterResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                     const KMeansOptions& options = {});

/// Sum of squared distances from each point to its labeled centroid.
double within_cluster_ss(const Matrix& points, const std::vector<std::size_t>& labels,
                         const Matrix& centroids);

}  // namespace dst
