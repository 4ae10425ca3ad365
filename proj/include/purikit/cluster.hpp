#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "purikit/linalg.hpp"

namespace purikit {

// Latent feature vector R(x); dimension is fixed across a pipeline run.
using LatentVector = std::vector<double>;

struct KmeansResult {
    std::vector<int> assignments;
    std::vector<LatentVector> centers;
    double wcss = 0.0;
    // WCSS after each Lloyd iteration; non-increasing by construction.
    std::vector<double> wcss_trace;
};

// Lloyd's algorithm from k-means++ seeding. Empty clusters are repaired by
// reseeding to the point farthest from its current center. Terminates on an
// assignment fixpoint or after 300 iterations.
KmeansResult kmeans(const std::vector<LatentVector>& points, int psi, std::uint64_t seed);

struct ClusterCountSelection {
    int psi_star = 1;
    int effective_psi_max = 1;
    std::vector<double> wcss_curve;  // wcss_curve[i] is WCSS at psi = i + 1
    std::vector<std::string> warnings;
};

// Elbow selection: runs kmeans for psi = 1..psi_max (best of 3 seeded
// restarts each) and picks the psi in [2, psi_max-1] maximizing the discrete
// second difference of the WCSS curve, ties toward smaller psi. A total
// relative WCSS drop below 5% means the curve is flat and psi* = 1. psi_max
// is lowered with a warning when there are too few (distinct) points.
ClusterCountSelection select_cluster_count(const std::vector<LatentVector>& points, int psi_max,
                                           std::uint64_t seed);

struct ClusterDistribution {
    LatentVector mean;
    Matrix covariance;  // biased sample covariance plus trace-scaled shrinkage
    Matrix inverse;     // Cholesky inverse, or Moore-Penrose pseudo-inverse
    bool pseudo_flag = false;
};

// Gaussian statistics of a cluster. The covariance is the biased (1/n)
// estimate plus 1e-6 * trace/k * I shrinkage. When the raw covariance is
// numerically rank-deficient (eigenvalues at or below 1e-10 of the largest)
// the inverse falls back to the Moore-Penrose pseudo-inverse and pseudo_flag
// is set.
ClusterDistribution fit_distribution(const std::vector<LatentVector>& members);

// sqrt((r - mu)^T inverse (r - mu)). Quadratic forms below -1e-10 are
// rejected; tiny negatives from rounding clamp to zero.
double mahalanobis(const LatentVector& r, const ClusterDistribution& dist);

}  // namespace purikit
