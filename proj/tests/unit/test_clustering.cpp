#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "fedl/clustering.hpp"
#include "fedl/error.hpp"
#include "fedl/min_cost_flow.hpp"
#include "fedl/rng.hpp"
#include "support/oracles.hpp"

using namespace fedl;
using namespace fedl::cluster;

namespace {

ClusterConfig windows(std::size_t k, std::vector<std::size_t> low, std::vector<std::size_t> high) {
    ClusterConfig c;
    c.k = k;
    c.theta_low = std::move(low);
    c.theta_high = std::move(high);
    return c;
}

std::vector<Point> on_line(std::initializer_list<double> xs) {
    std::vector<Point> p;
    for (double x : xs) p.push_back({x, 0.0});
    return p;
}

}  // namespace

TEST_CASE("min cost flow solves a small transportation problem") {
    // Two sources of 1 unit and two sinks; the cheap cross assignment wins.
    MinCostFlow g(6);
    g.add_edge(0, 1, 1, 0);
    g.add_edge(0, 2, 1, 0);
    const auto a = g.add_edge(1, 3, 1, 5);
    const auto b = g.add_edge(1, 4, 1, 1);
    const auto c = g.add_edge(2, 3, 1, 1);
    const auto d = g.add_edge(2, 4, 1, 5);
    g.add_edge(3, 5, 1, 0);
    g.add_edge(4, 5, 1, 0);
    const auto r = g.solve(0, 5, 2);
    CHECK(r.flow == 2);
    CHECK(r.cost == 2);
    CHECK(g.flow_on(a) == 0);
    CHECK(g.flow_on(b) == 1);
    CHECK(g.flow_on(c) == 1);
    CHECK(g.flow_on(d) == 0);
}

TEST_CASE("assign_clusters on a line with a balanced window") {
    const auto pts = on_line({0, 1, 10, 11});
    const auto cents = on_line({0.5, 10.5});
    const auto labels = assign_clusters(pts, cents, windows(2, {2}, {2}));
    CHECK(labels == std::vector<std::size_t>{0, 0, 1, 1});
}

TEST_CASE("assign_clusters window forces a far point across") {
    const auto pts = on_line({0, 1, 2, 10});
    const auto cents = on_line({0.0, 10.0});
    const auto labels = assign_clusters(pts, cents, windows(2, {2}, {2}));
    CHECK(labels == std::vector<std::size_t>{0, 0, 1, 1});
    std::vector<std::vector<std::size_t>> argmins;
    const double best = fedl::testing::brute_force_assignment(pts, cents, {2, 2}, {2, 2}, &argmins);
    CHECK(objective(pts, labels, cents) == doctest::Approx(best));
}

TEST_CASE("assign_clusters single cluster and relaxed windows") {
    const auto pts = on_line({3, -1, 8, 2, 7});
    const auto all = assign_clusters(pts, on_line({0}), windows(1, {5}, {5}));
    CHECK(all == std::vector<std::size_t>(5, 0));

    const auto cents = on_line({0, 5, 9});
    const auto labels = assign_clusters(pts, cents, windows(3, {0}, {5}));
    for (std::size_t i = 0; i < pts.size(); ++i) {
        std::size_t nearest = 0;
        for (std::size_t k = 1; k < cents.size(); ++k)
            if (squared_distance(pts[i], cents[k]) < squared_distance(pts[i], cents[nearest])) nearest = k;
        CHECK(labels[i] == nearest);
    }
}

TEST_CASE("ties go to the lower cluster index") {
    const auto pts = on_line({5, 5});
    const auto labels = assign_clusters(pts, on_line({0, 10}), windows(2, {0}, {2}));
    CHECK(labels == std::vector<std::size_t>{0, 0});
}

TEST_CASE("assign_clusters matches brute force on random instances") {
    Rng rng(77);
    for (int t = 0; t < 60; ++t) {
        const std::size_t n = 1 + rng.below(8);
        const std::size_t k = 1 + rng.below(std::min<std::size_t>(3, n));
        std::vector<Point> pts(n), cents(k);
        for (auto& p : pts) p = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
        for (auto& c : cents) c = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
        std::vector<std::size_t> low(k), high(k);
        std::size_t sum_low = 0;
        for (std::size_t c = 0; c < k; ++c) {
            low[c] = rng.below(n / k + 1);
            sum_low += low[c];
        }
        for (std::size_t c = 0; c < k; ++c) high[c] = low[c] + rng.below(n + 1);
        std::size_t sum_high = 0;
        for (auto h : high) sum_high += h;
        if (sum_low > n || sum_high < n) continue;
        std::vector<std::vector<std::size_t>> argmins;
        const double best = fedl::testing::brute_force_assignment(pts, cents, low, high, &argmins);
        const auto labels = assign_clusters(pts, cents, windows(k, low, high));
        CHECK(std::find(argmins.begin(), argmins.end(), labels) != argmins.end());
        CHECK(objective(pts, labels, cents) == doctest::Approx(best).epsilon(1e-12));
    }
}

TEST_CASE("infeasible windows name the violated constraint") {
    const auto pts = on_line({0, 1, 2});
    try {
        assign_clusters(pts, on_line({0, 1}), windows(2, {2}, {3}));
        FAIL("expected InfeasibleError");
    } catch (const InfeasibleError& e) {
        CHECK(std::string(e.what()).find("theta_low") != std::string::npos);
    }
    try {
        resolve_windows(windows(2, {0}, {1}), 3);
        FAIL("expected InfeasibleError");
    } catch (const InfeasibleError& e) {
        CHECK(std::string(e.what()).find("theta_high") != std::string::npos);
    }
    CHECK_THROWS_AS(resolve_windows(windows(2, {2, 0}, {1, 3}), 3), InfeasibleError);
    CHECK_THROWS_AS(resolve_windows(windows(2, {0, 0, 0}, {}), 3), InfeasibleError);
}

TEST_CASE("balanced windows by default") {
    ClusterConfig c;
    c.k = 3;
    const auto w = resolve_windows(c, 10);
    CHECK(w.low == std::vector<std::size_t>{3, 3, 3});
    CHECK(w.high == std::vector<std::size_t>{4, 4, 4});
    c.k = 2;
    const auto even = resolve_windows(c, 58);
    CHECK(even.low == std::vector<std::size_t>{29, 29});
    CHECK(even.high == std::vector<std::size_t>{29, 29});
}

TEST_CASE("update_centroids two-case rule") {
    const std::vector<Point> pts{{0, 0}, {2, 2}, {5, 5}};
    const std::vector<Point> prev{{9, 9}, {8, 8}, {7, 7}};
    const std::vector<std::size_t> labels{0, 0, 1};
    const auto next = update_centroids(pts, labels, prev, windows(3, {1}, {3}));
    CHECK(next[0] == Point{1, 1});
    CHECK(next[1] == Point{5, 5});
    CHECK(next[2] == prev[2]);
    const auto zero_low = update_centroids(pts, labels, prev, windows(3, {0}, {3}));
    CHECK(zero_low[2] == prev[2]);
    const auto tight = update_centroids(pts, labels, prev, windows(3, {0}, {1}));
    CHECK(tight[0] == prev[0]);
    CHECK(tight[1] == Point{5, 5});
}

TEST_CASE("constrained_kmeans on two stations") {
    const std::vector<Point> pts{{56.45, -2.95}, {56.47, -3.0}};
    auto cfg = windows(2, {1}, {1});
    const auto a = constrained_kmeans(std::span<const Point>(pts), cfg);
    CHECK(a.converged);
    CHECK(a.objective == 0.0);
    CHECK(a.labels[0] != a.labels[1]);
}

TEST_CASE("constrained_kmeans iterates stay feasible and stop at a fixpoint") {
    Rng rng(5);
    for (int t = 0; t < 30; ++t) {
        const std::size_t n = 2 + rng.below(7);
        std::vector<data::StationInfo> st;
        for (std::size_t i = 0; i < n; ++i)
            st.push_back({"S" + std::to_string(i), rng.uniform(56.4, 56.5), rng.uniform(-3.1, -2.9)});
        ClusterConfig cfg;
        cfg.k = 2;
        cfg.seed = rng.next_u64();
        const auto w = resolve_windows(cfg, n);
        std::vector<IterationTrace> traces;
        const auto a = constrained_kmeans(st, cfg, [&](const IterationTrace& tr) { traces.push_back(tr); });
        REQUIRE_FALSE(traces.empty());
        std::vector<Point> pts;
        for (const auto& s : st) pts.push_back({s.latitude, s.longitude});
        for (const auto& tr : traces) {
            std::vector<std::size_t> sizes(2, 0);
            for (auto l : tr.labels) ++sizes[l];
            for (std::size_t k = 0; k < 2; ++k) {
                CHECK(sizes[k] >= w.low[k]);
                CHECK(sizes[k] <= w.high[k]);
            }
            std::vector<std::vector<std::size_t>> argmins;
            fedl::testing::brute_force_assignment(pts, tr.centroids_before, w.low, w.high, &argmins);
            CHECK(std::find(argmins.begin(), argmins.end(), tr.labels) != argmins.end());
        }
        CHECK(a.converged);
        CHECK(traces.back().centroids_after == traces.back().centroids_before);
        CHECK(assign_clusters(pts, a.centroids, cfg) == a.labels);
        const double global = fedl::testing::brute_force_assignment(pts, a.centroids, w.low, w.high);
        CHECK(a.objective >= global - 1e-15);
        for (const auto& row : a.tau()) CHECK(std::count(row.begin(), row.end(), 1) == 1);
    }
}

TEST_CASE("constrained_kmeans is seeded and writes station,cluster rows") {
    std::vector<data::StationInfo> st;
    Rng rng(1);
    for (int i = 0; i < 20; ++i) st.push_back({"CS" + std::to_string(i), rng.uniform(0, 1), rng.uniform(0, 1)});
    ClusterConfig cfg;
    cfg.k = 3;
    cfg.seed = 9;
    const auto a = constrained_kmeans(st, cfg);
    const auto b = constrained_kmeans(st, cfg);
    CHECK(a.labels == b.labels);
    CHECK(a.centroids == b.centroids);
    CHECK(a.objective >= 0.0);
    CHECK(a.cluster_of("CS4") == a.labels[4]);
    std::ostringstream out;
    write_assignment(out, a);
    CHECK(out.str().rfind("station_id,cluster_id\nCS0,", 0) == 0);

    cfg.k = 30;
    CHECK_THROWS_AS(constrained_kmeans(st, cfg), InfeasibleError);
}
