#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace fedl {

/// Successive-shortest-path min-cost flow on integer costs. Bellman-Ford on
/// the residual graph, so negative edge costs are allowed as long as the
/// initial graph has no negative cycle. Sized for assignment problems with
/// at most a few thousand edges.
class MinCostFlow {
public:
    using Cost = std::int64_t;

    explicit MinCostFlow(std::size_t nodes);

    /// Returns an edge handle for flow_on().
    std::size_t add_edge(std::size_t from, std::size_t to, std::int64_t capacity, Cost cost);

    struct Result {
        std::int64_t flow = 0;
        Cost cost = 0;
    };

    /// Pushes up to `limit` units from source to sink at minimum total cost.
    Result solve(std::size_t source, std::size_t sink, std::int64_t limit);

    std::int64_t flow_on(std::size_t edge) const;

private:
    struct Arc {
        std::size_t to;
        std::size_t rev;  // index of the reverse arc in graph_[to]
        std::int64_t capacity;
        Cost cost;
    };
    std::vector<std::vector<Arc>> graph_;
    std::vector<std::pair<std::size_t, std::size_t>> handles_;  // (node, arc index)
    std::vector<std::int64_t> initial_capacity_;
};

}  // namespace fedl
