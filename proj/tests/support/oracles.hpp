#pragma once
// Independent reference computations used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "fedl/clustering.hpp"
#include "fedl/nn.hpp"
#include "fedl/rng.hpp"

namespace fedl::testing {

/// Central differences of the SSE loss in Train mode. Masks depend on the
/// seed and sample ids only, so perturbing a parameter keeps them fixed.
inline std::vector<double> finite_difference_gradient(const nn::Network& net, const nn::Matrix& x,
                                                      const nn::Vector& y, std::uint64_t seed,
                                                      double h = 1e-5) {
    nn::Network probe = net;
    std::vector<double> flat = net.params.flatten();
    std::vector<double> out(flat.size());
    auto loss_at = [&](std::size_t i, double value) {
        std::vector<double> p = flat;
        p[i] = value;
        probe.params.assign_flat(p);
        const auto fr = nn::forward(probe, x, nn::Mode::Train, seed);
        return nn::sse_loss(fr.output.col(0), y);
    };
    for (std::size_t i = 0; i < flat.size(); ++i) {
        out[i] = (loss_at(i, flat[i] + h) - loss_at(i, flat[i] - h)) / (2.0 * h);
    }
    return out;
}

/// |a - b| / max(|a|, |b|, floor); 0 when both are equal (including 0, 0).
inline double relative_error(double a, double b, double floor = 0.0) {
    if (a == b) return 0.0;
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

struct RandomNetCase {
    nn::Network net;
    nn::Matrix x;
    nn::Vector y;
};

/// Random tanh stack (1-3 hidden layers) with at most `max_params`
/// parameters, optional dropout after the last hidden layer and a batch of
/// 1..max_rows samples.
inline RandomNetCase random_net_case(std::uint64_t seed, std::size_t max_params = 200,
                                     std::size_t max_rows = 16) {
    Rng rng(seed);
    for (;;) {
        const std::size_t input = 1 + rng.below(6);
        const std::size_t depth = 1 + rng.below(3);
        std::vector<std::size_t> hidden;
        for (std::size_t d = 0; d < depth; ++d) hidden.push_back(1 + rng.below(8));
        const double dropout = rng.below(2) == 0 ? 0.0 : 0.15;
        const auto specs = nn::regression_architecture(input, hidden, dropout);
        nn::Network net = nn::init_network(specs, rng.next_u64());
        if (net.parameter_count() > max_params) continue;
        // Nonzero biases so their gradients are exercised too.
        std::vector<double> flat = net.params.flatten();
        for (double& v : flat) v += rng.uniform(-0.3, 0.3);
        net.params.assign_flat(flat);
        const auto rows = static_cast<Eigen::Index>(1 + rng.below(max_rows));
        nn::Matrix x(rows, static_cast<Eigen::Index>(input));
        for (Eigen::Index r = 0; r < x.rows(); ++r)
            for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = rng.uniform(-1.5, 1.5);
        nn::Vector y(rows);
        for (Eigen::Index r = 0; r < rows; ++r) y(r) = rng.normal();
        return {std::move(net), std::move(x), std::move(y)};
    }
}

/// Every labelling of I points into K clusters that satisfies the windows,
/// scored by the assignment objective. Returns the minimum cost; `argmins`
/// receives every labelling within `slack` of it.
inline double brute_force_assignment(const std::vector<cluster::Point>& points,
                                     const std::vector<cluster::Point>& centroids,
                                     const std::vector<std::size_t>& low,
                                     const std::vector<std::size_t>& high,
                                     std::vector<std::vector<std::size_t>>* argmins = nullptr,
                                     double slack = 1e-12) {
    const std::size_t n = points.size();
    const std::size_t k = centroids.size();
    std::vector<std::size_t> labels(n, 0);
    std::vector<std::pair<double, std::vector<std::size_t>>> feasible;
    double best = std::numeric_limits<double>::infinity();
    for (;;) {
        std::vector<std::size_t> sizes(k, 0);
        for (auto l : labels) ++sizes[l];
        bool ok = true;
        for (std::size_t c = 0; c < k; ++c) ok = ok && sizes[c] >= low[c] && sizes[c] <= high[c];
        if (ok) {
            double cost = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double dx = points[i][0] - centroids[labels[i]][0];
                const double dy = points[i][1] - centroids[labels[i]][1];
                cost += dx * dx + dy * dy;
            }
            best = std::min(best, cost);
            if (argmins) feasible.emplace_back(cost, labels);
        }
        std::size_t pos = 0;
        while (pos < n && ++labels[pos] == k) labels[pos++] = 0;
        if (pos == n) break;
    }
    if (argmins) {
        argmins->clear();
        for (auto& [cost, l] : feasible)
            if (cost <= best + slack * std::max(1.0, best)) argmins->push_back(l);
    }
    return best;
}

}  // namespace fedl::testing
