#include "fedl/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fedl/csv.hpp"
#include "fedl/error.hpp"
#include "fedl/min_cost_flow.hpp"
#include "fedl/rng.hpp"

namespace fedl::cluster {

Windows resolve_windows(const ClusterConfig& config, std::size_t n_points) {
    const std::size_t k = config.k;
    if (k < 1) throw InfeasibleError("cluster count K must be at least 1");
    Windows w;
    if (config.theta_low.empty() && config.theta_high.empty()) {
        w.low.assign(k, n_points / k);
        w.high.assign(k, (n_points + k - 1) / k);
    } else {
        auto expand = [k](const std::vector<std::size_t>& v, const char* name) {
            if (v.size() == 1) return std::vector<std::size_t>(k, v.front());
            if (v.size() != k) {
                throw InfeasibleError(std::string(name) + " must have 1 or K=" + std::to_string(k) +
                                      " entries");
            }
            return v;
        };
        w.low = config.theta_low.empty() ? std::vector<std::size_t>(k, 0)
                                         : expand(config.theta_low, "theta_low");
        w.high = config.theta_high.empty() ? std::vector<std::size_t>(k, n_points)
                                           : expand(config.theta_high, "theta_high");
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (w.low[c] > w.high[c]) {
            throw InfeasibleError("cluster " + std::to_string(c) + ": theta_low " +
                                  std::to_string(w.low[c]) + " exceeds theta_high " +
                                  std::to_string(w.high[c]));
        }
    }
    const auto sum_low = std::accumulate(w.low.begin(), w.low.end(), std::size_t{0});
    const auto sum_high = std::accumulate(w.high.begin(), w.high.end(), std::size_t{0});
    if (sum_low > n_points) {
        throw InfeasibleError("sum of theta_low (" + std::to_string(sum_low) +
                              ") exceeds the number of stations (" + std::to_string(n_points) + ")");
    }
    if (sum_high < n_points) {
        throw InfeasibleError("sum of theta_high (" + std::to_string(sum_high) +
                              ") is below the number of stations (" + std::to_string(n_points) + ")");
    }
    return w;
}

double squared_distance(const Point& a, const Point& b) noexcept {
    const double d0 = a[0] - b[0];
    const double d1 = a[1] - b[1];
    return d0 * d0 + d1 * d1;
}

double objective(std::span<const Point> points, std::span<const std::size_t> labels,
                 std::span<const Point> centroids) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        total += squared_distance(points[i], centroids[labels[i]]);
    }
    return total;
}

std::vector<std::size_t> assign_clusters(std::span<const Point> points,
                                         std::span<const Point> centroids,
                                         const ClusterConfig& config) {
    const std::size_t n = points.size();
    const std::size_t k = config.k;
    if (centroids.size() != k) {
        throw ShapeError("assign_clusters: " + std::to_string(centroids.size()) +
                         " centroids for K=" + std::to_string(k));
    }
    const Windows w = resolve_windows(config, n);
    if (n == 0) return {};

    // Integer costs: scaled distance in the high bits, cluster index in the
    // low bits so exact ties resolve toward lower indices.
    double dmax = 0.0;
    for (const auto& p : points)
        for (const auto& c : centroids) dmax = std::max(dmax, squared_distance(p, c));
    const auto tie_span = static_cast<std::int64_t>(n * (k - 1) + 1);
    const double budget = std::ldexp(1.0, 61) / (static_cast<double>(n) * static_cast<double>(tie_span));
    const double scale = std::min(std::ldexp(1.0, 52), std::floor(budget));

    const std::size_t source = 0;
    const std::size_t first_point = 1;
    const std::size_t first_cluster = first_point + n;
    const std::size_t overflow = first_cluster + k;
    const std::size_t sink = overflow + 1;
    MinCostFlow flow(sink + 1);

    std::vector<std::size_t> edge(n * k);
    for (std::size_t i = 0; i < n; ++i) {
        flow.add_edge(source, first_point + i, 1, 0);
        for (std::size_t c = 0; c < k; ++c) {
            const double d = squared_distance(points[i], centroids[c]);
            const auto primary = dmax > 0.0 ? static_cast<std::int64_t>(std::llround(d / dmax * scale)) : 0;
            edge[i * k + c] = flow.add_edge(first_point + i, first_cluster + c, 1,
                                            primary * tie_span + static_cast<std::int64_t>(c));
        }
    }
    // Lower bounds: the theta_low units of each cluster must reach the sink
    // directly; only the remaining I - sum(low) units may use the overflow.
    std::size_t sum_low = 0;
    for (std::size_t c = 0; c < k; ++c) {
        flow.add_edge(first_cluster + c, sink, static_cast<std::int64_t>(w.low[c]), 0);
        flow.add_edge(first_cluster + c, overflow, static_cast<std::int64_t>(w.high[c] - w.low[c]), 0);
        sum_low += w.low[c];
    }
    flow.add_edge(overflow, sink, static_cast<std::int64_t>(n - sum_low), 0);

    const auto result = flow.solve(source, sink, static_cast<std::int64_t>(n));
    if (result.flow != static_cast<std::int64_t>(n)) {
        throw InfeasibleError("no assignment satisfies the cluster size windows");
    }
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < k; ++c) {
            if (flow.flow_on(edge[i * k + c]) == 1) labels[i] = c;
        }
    }
    return labels;
}

std::vector<Point> update_centroids(std::span<const Point> points,
                                    std::span<const std::size_t> labels,
                                    std::span<const Point> previous, const ClusterConfig& config) {
    if (labels.size() != points.size() || previous.size() != config.k) {
        throw ShapeError("update_centroids: labels/centroids do not match points/K");
    }
    const Windows w = resolve_windows(config, points.size());
    std::vector<Point> sum(config.k, Point{0.0, 0.0});
    std::vector<std::size_t> count(config.k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (labels[i] >= config.k) throw ShapeError("label out of range");
        sum[labels[i]][0] += points[i][0];
        sum[labels[i]][1] += points[i][1];
        ++count[labels[i]];
    }
    std::vector<Point> next(previous.begin(), previous.end());
    for (std::size_t c = 0; c < config.k; ++c) {
        if (count[c] > 0 && count[c] >= w.low[c] && count[c] <= w.high[c]) {
            const double m = static_cast<double>(count[c]);
            next[c] = {sum[c][0] / m, sum[c][1] / m};
        }
    }
    return next;
}

std::vector<std::size_t> ClusterAssignment::sizes() const {
    std::vector<std::size_t> s(centroids.size(), 0);
    for (auto l : labels) ++s[l];
    return s;
}

std::vector<std::vector<std::uint8_t>> ClusterAssignment::tau() const {
    std::vector<std::vector<std::uint8_t>> t(labels.size(), std::vector<std::uint8_t>(centroids.size(), 0));
    for (std::size_t i = 0; i < labels.size(); ++i) t[i][labels[i]] = 1;
    return t;
}

std::size_t ClusterAssignment::cluster_of(std::string_view station_id) const {
    for (std::size_t i = 0; i < station_ids.size(); ++i) {
        if (station_ids[i] == station_id) return labels[i];
    }
    throw DataError("station '" + std::string(station_id) + "' has no cluster assignment");
}

ClusterAssignment constrained_kmeans(std::span<const Point> points, const ClusterConfig& config,
                                     const IterationObserver& observer) {
    const std::size_t n = points.size();
    if (n < config.k) {
        throw InfeasibleError("K=" + std::to_string(config.k) + " exceeds the number of stations (" +
                              std::to_string(n) + ")");
    }
    resolve_windows(config, n);
    if (config.max_iterations < 1) throw InfeasibleError("max_iterations must be at least 1");

    // Seeded sample of K points, preferring distinct coordinates.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(config.seed, 0x6b6d65616e73));  // "kmeans"
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<Point> centroids;
    std::vector<bool> used(n, false);
    for (std::size_t idx : order) {
        if (centroids.size() == config.k) break;
        if (std::find(centroids.begin(), centroids.end(), points[idx]) == centroids.end()) {
            centroids.push_back(points[idx]);
            used[idx] = true;
        }
    }
    for (std::size_t idx : order) {
        if (centroids.size() == config.k) break;
        if (!used[idx]) centroids.push_back(points[idx]);
    }

    ClusterAssignment best;
    best.objective = std::numeric_limits<double>::infinity();
    for (std::size_t t = 1; t <= config.max_iterations; ++t) {
        auto labels = assign_clusters(points, centroids, config);
        auto next = update_centroids(points, labels, centroids, config);
        const double obj = objective(points, labels, next);
        if (observer) observer({t, centroids, labels, next});

        const bool fixpoint = next == centroids;
        if (obj <= best.objective || fixpoint) {
            best.labels = std::move(labels);
            best.centroids = next;
            best.objective = obj;
        }
        best.iterations_used = t;
        if (fixpoint) {
            best.converged = true;
            break;
        }
        centroids = std::move(next);
    }
    return best;
}

ClusterAssignment constrained_kmeans(std::span<const data::StationInfo> stations,
                                     const ClusterConfig& config, const IterationObserver& observer) {
    std::vector<Point> points;
    points.reserve(stations.size());
    for (const auto& s : stations) points.push_back({s.latitude, s.longitude});
    ClusterAssignment a = constrained_kmeans(std::span<const Point>(points), config, observer);
    for (const auto& s : stations) a.station_ids.push_back(s.station_id);
    return a;
}

void write_assignment(std::ostream& out, const ClusterAssignment& a) {
    out << "station_id,cluster_id\n";
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
        out << csv::escape(a.station_ids.at(i)) << ',' << a.labels[i] << '\n';
    }
}

}  // namespace fedl::cluster
