#pragma once

// Size-constrained K-means over station coordinates. The assignment step is
// solved exactly as a transportation problem for fixed centroids; centroid
// updates take the member mean when the cluster size lies inside its window
// and keep the previous centroid otherwise.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fedl/data.hpp"

namespace fedl::cluster {

/// (latitude, longitude) in degrees; distances are planar squared Euclidean.
using Point = std::array<double, 2>;

struct ClusterConfig {
    std::size_t k = 2;
    /// Per-cluster size windows. Empty means balanced: floor(I/K) .. ceil(I/K).
    std::vector<std::size_t> theta_low;
    std::vector<std::size_t> theta_high;
    std::size_t max_iterations = 100;
    std::uint64_t seed = 0;
};

/// Sizes windows for `n_points`; throws InfeasibleError naming the violated
/// constraint when sum(low) > I, sum(high) < I, or low > high for a cluster.
struct Windows {
    std::vector<std::size_t> low;
    std::vector<std::size_t> high;
};
Windows resolve_windows(const ClusterConfig& config, std::size_t n_points);

double squared_distance(const Point& a, const Point& b) noexcept;

/// Sum of squared distances from each point to its assigned centroid.
double objective(std::span<const Point> points, std::span<const std::size_t> labels,
                 std::span<const Point> centroids);

/// Exact minimizer of the assignment objective under the size windows.
/// `labels[i]` is the cluster of point i. Among equal-cost optima the one
/// with the smallest sum of cluster indices is returned.
std::vector<std::size_t> assign_clusters(std::span<const Point> points,
                                         std::span<const Point> centroids,
                                         const ClusterConfig& config);

std::vector<Point> update_centroids(std::span<const Point> points,
                                    std::span<const std::size_t> labels,
                                    std::span<const Point> previous, const ClusterConfig& config);

struct ClusterAssignment {
    std::vector<std::string> station_ids;
    std::vector<std::size_t> labels;  // row i of tau has its single 1 in column labels[i]
    std::vector<Point> centroids;
    std::size_t iterations_used = 0;
    double objective = 0.0;
    bool converged = false;

    std::vector<std::size_t> sizes() const;
    /// Dense binary stations x clusters matrix.
    std::vector<std::vector<std::uint8_t>> tau() const;
    std::size_t cluster_of(std::string_view station_id) const;
};

struct IterationTrace {
    std::size_t iteration;               // 1-based
    std::vector<Point> centroids_before;  // used by the assignment step
    std::vector<std::size_t> labels;
    std::vector<Point> centroids_after;
};

using IterationObserver = std::function<void(const IterationTrace&)>;

/// Seeds K distinct station coordinates, then alternates assignment and
/// update until the centroids are an exact fixpoint or max_iterations is
/// hit. Without convergence the lowest-objective iterate is returned.
ClusterAssignment constrained_kmeans(std::span<const data::StationInfo> stations,
                                     const ClusterConfig& config,
                                     const IterationObserver& observer = {});

ClusterAssignment constrained_kmeans(std::span<const Point> points, const ClusterConfig& config,
                                     const IterationObserver& observer = {});

/// `station_id,cluster_id` CSV, stations in input order.
void write_assignment(std::ostream& out, const ClusterAssignment& a);

}  // namespace fedl::cluster
