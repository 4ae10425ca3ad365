#include "purikit/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "purikit/rng.hpp"

namespace purikit {

namespace {

double dist_sq(const LatentVector& a, const LatentVector& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

std::size_t count_distinct(const std::vector<LatentVector>& points) {
    std::set<LatentVector> s(points.begin(), points.end());
    return s.size();
}

// D^2-weighted k-means++ seeding.
std::vector<LatentVector> seed_centers(const std::vector<LatentVector>& points, int psi, Rng& rng) {
    std::vector<LatentVector> centers;
    centers.reserve(psi);
    centers.push_back(points[rng.index(points.size())]);
    std::vector<double> d2(points.size());
    for (int k = 1; k < psi; ++k) {
        double total = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centers) best = std::min(best, dist_sq(points[i], c));
            d2[i] = best;
            total += best;
        }
        if (total <= 0.0) {
            // All points coincide with existing centers; any pick works.
            centers.push_back(points[rng.index(points.size())]);
            continue;
        }
        const double target = rng.uniform() * total;
        double acc = 0.0;
        std::size_t pick = points.size() - 1;
        for (std::size_t i = 0; i < points.size(); ++i) {
            acc += d2[i];
            if (acc >= target) {
                pick = i;
                break;
            }
        }
        centers.push_back(points[pick]);
    }
    return centers;
}

}  // namespace

KmeansResult kmeans(const std::vector<LatentVector>& points, int psi, std::uint64_t seed) {
    if (points.empty()) throw std::invalid_argument("kmeans: no points");
    if (psi < 1) throw std::invalid_argument("kmeans: psi must be at least 1");
    const std::size_t dim = points[0].size();
    for (const auto& p : points)
        if (p.size() != dim) throw std::invalid_argument("kmeans: inconsistent point dimensions");
    if (static_cast<std::size_t>(psi) > count_distinct(points))
        throw std::invalid_argument("kmeans: psi " + std::to_string(psi) +
                                    " exceeds the number of distinct points");

    Rng rng(seed);
    KmeansResult res;
    res.centers = seed_centers(points, psi, rng);
    res.assignments.assign(points.size(), -1);

    constexpr int kMaxIters = 300;
    for (int iter = 0; iter < kMaxIters; ++iter) {
        // Assignment step; ties go to the lowest cluster index.
        bool changed = false;
        for (std::size_t i = 0; i < points.size(); ++i) {
            int best = 0;
            double best_d = dist_sq(points[i], res.centers[0]);
            for (int k = 1; k < psi; ++k) {
                const double d = dist_sq(points[i], res.centers[k]);
                if (d < best_d) {
                    best_d = d;
                    best = k;
                }
            }
            if (res.assignments[i] != best) {
                res.assignments[i] = best;
                changed = true;
            }
        }

        // Repair empty clusters by stealing the point farthest from its
        // center; strictly decreases WCSS.
        std::vector<int> counts(psi, 0);
        for (int a : res.assignments) ++counts[a];
        for (int k = 0; k < psi; ++k) {
            if (counts[k] > 0) continue;
            double worst = -1.0;
            std::size_t pick = 0;
            for (std::size_t i = 0; i < points.size(); ++i) {
                if (counts[res.assignments[i]] <= 1) continue;
                const double d = dist_sq(points[i], res.centers[res.assignments[i]]);
                if (d > worst) {
                    worst = d;
                    pick = i;
                }
            }
            --counts[res.assignments[pick]];
            res.assignments[pick] = k;
            counts[k] = 1;
            changed = true;
        }

        // Update step.
        std::vector<LatentVector> sums(psi, LatentVector(dim, 0.0));
        for (std::size_t i = 0; i < points.size(); ++i)
            for (std::size_t j = 0; j < dim; ++j) sums[res.assignments[i]][j] += points[i][j];
        for (int k = 0; k < psi; ++k)
            for (std::size_t j = 0; j < dim; ++j) res.centers[k][j] = sums[k][j] / counts[k];

        double wcss = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i)
            wcss += dist_sq(points[i], res.centers[res.assignments[i]]);
        if (!res.wcss_trace.empty() && wcss > res.wcss_trace.back() + 1e-9 * std::max(1.0, res.wcss_trace.back()))
            throw std::logic_error("kmeans: WCSS increased across a Lloyd iteration");
        res.wcss_trace.push_back(wcss);
        res.wcss = wcss;

        if (!changed) break;
    }
    return res;
}

ClusterCountSelection select_cluster_count(const std::vector<LatentVector>& points, int psi_max,
                                           std::uint64_t seed) {
    if (psi_max < 2) throw std::invalid_argument("select_cluster_count: psi_max must be at least 2");
    if (points.empty()) throw std::invalid_argument("select_cluster_count: no points");

    ClusterCountSelection sel;
    int effective = psi_max;
    if (points.size() < static_cast<std::size_t>(psi_max) + 1) {
        effective = std::max(1, static_cast<int>(points.size()) - 1);
        sel.warnings.push_back("psi_max lowered to " + std::to_string(effective) + ": only " +
                               std::to_string(points.size()) + " points available");
    }
    const std::size_t distinct = count_distinct(points);
    if (static_cast<std::size_t>(effective) > distinct) {
        effective = static_cast<int>(distinct);
        sel.warnings.push_back("psi_max lowered to " + std::to_string(effective) + ": only " +
                               std::to_string(distinct) + " distinct points");
    }
    sel.effective_psi_max = effective;

    constexpr int kRestarts = 3;
    for (int psi = 1; psi <= effective; ++psi) {
        double best = std::numeric_limits<double>::infinity();
        for (int t = 0; t < kRestarts; ++t)
            best = std::min(best, kmeans(points, psi, derive_seed(seed, psi, t)).wcss);
        sel.wcss_curve.push_back(best);
    }

    const double w1 = sel.wcss_curve.front();
    const double w_last = sel.wcss_curve.back();
    const bool flat = w1 <= 0.0 || (w1 - w_last) / w1 < 0.05;
    if (flat || effective == 1) {
        sel.psi_star = 1;
        return sel;
    }
    if (effective == 2) {
        sel.psi_star = 2;  // no interior candidate; the drop is significant
        return sel;
    }

    // Maximal discrete second difference over psi in [2, effective - 1],
    // ties toward smaller psi.
    int best_psi = 2;
    double best_curv = -std::numeric_limits<double>::infinity();
    for (int psi = 2; psi <= effective - 1; ++psi) {
        const double curv = sel.wcss_curve[psi - 2] - 2.0 * sel.wcss_curve[psi - 1] + sel.wcss_curve[psi];
        if (curv > best_curv) {
            best_curv = curv;
            best_psi = psi;
        }
    }
    sel.psi_star = best_psi;
    return sel;
}

ClusterDistribution fit_distribution(const std::vector<LatentVector>& members) {
    if (members.size() < 2) throw std::invalid_argument("fit_distribution: need at least 2 members");
    const int k = static_cast<int>(members[0].size());
    for (const auto& m : members) {
        if (static_cast<int>(m.size()) != k)
            throw std::invalid_argument("fit_distribution: inconsistent dimensions");
        for (double v : m)
            if (!std::isfinite(v)) throw std::invalid_argument("fit_distribution: non-finite entry");
    }

    ClusterDistribution dist;
    dist.mean.assign(k, 0.0);
    for (const auto& m : members)
        for (int i = 0; i < k; ++i) dist.mean[i] += m[i];
    for (int i = 0; i < k; ++i) dist.mean[i] /= static_cast<double>(members.size());

    Matrix raw(k, k);
    for (const auto& m : members)
        for (int i = 0; i < k; ++i) {
            const double di = m[i] - dist.mean[i];
            for (int j = 0; j <= i; ++j) raw.at(i, j) += di * (m[j] - dist.mean[j]);
        }
    const double inv_n = 1.0 / static_cast<double>(members.size());
    for (int i = 0; i < k; ++i)
        for (int j = 0; j <= i; ++j) {
            const double v = raw.at(i, j) * inv_n;
            raw.at(i, j) = v;
            raw.at(j, i) = v;
        }

    double trace = 0.0;
    for (int i = 0; i < k; ++i) trace += raw.at(i, i);
    const double shrink = 1e-6 * trace / k;

    dist.covariance = raw;
    for (int i = 0; i < k; ++i) dist.covariance.at(i, i) += shrink;

    // Rank decision on the raw covariance: eigenvalues at or below
    // 1e-10 of the largest count as zero.
    std::vector<double> eigenvalues;
    Matrix eigenvectors;
    jacobi_eigh(raw, eigenvalues, eigenvectors);
    const double lambda_max = eigenvalues.empty() ? 0.0 : std::max(0.0, eigenvalues.back());
    const double cutoff = 1e-10 * lambda_max;
    bool full_rank = lambda_max > 0.0;
    for (double ev : eigenvalues)
        if (!(ev > cutoff)) full_rank = false;

    if (full_rank) {
        bool ok = false;
        dist.inverse = cholesky_inverse(dist.covariance, ok);
        if (ok) {
            dist.pseudo_flag = false;
            return dist;
        }
    }
    dist.inverse = sym_pseudo_inverse(eigenvalues, eigenvectors, cutoff);
    dist.pseudo_flag = true;
    return dist;
}

double mahalanobis(const LatentVector& r, const ClusterDistribution& dist) {
    if (r.size() != dist.mean.size())
        throw std::invalid_argument("mahalanobis: dimension mismatch (" + std::to_string(r.size()) +
                                    " vs " + std::to_string(dist.mean.size()) + ")");
    LatentVector diff(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) diff[i] = r[i] - dist.mean[i];
    const double q = quadratic_form(dist.inverse, diff);
    if (q < -1e-10) throw std::runtime_error("mahalanobis: negative quadratic form " + std::to_string(q));
    return q > 0.0 ? std::sqrt(q) : 0.0;
}

}  // namespace purikit
