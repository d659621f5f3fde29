#include "fedl/min_cost_flow.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace fedl {

MinCostFlow::MinCostFlow(std::size_t nodes) : graph_(nodes) {}

std::size_t MinCostFlow::add_edge(std::size_t from, std::size_t to, std::int64_t capacity, Cost cost) {
    if (from >= graph_.size() || to >= graph_.size()) {
        throw std::out_of_range("MinCostFlow::add_edge: node out of range");
    }
    const std::size_t fwd = graph_[from].size();
    const std::size_t bwd = graph_[to].size() + (from == to ? 1 : 0);
    graph_[from].push_back({to, bwd, capacity, cost});
    graph_[to].push_back({from, fwd, 0, -cost});
    handles_.emplace_back(from, fwd);
    initial_capacity_.push_back(capacity);
    return handles_.size() - 1;
}

MinCostFlow::Result MinCostFlow::solve(std::size_t source, std::size_t sink, std::int64_t limit) {
    constexpr Cost kInf = std::numeric_limits<Cost>::max();
    const std::size_t n = graph_.size();
    Result result;
    std::vector<Cost> dist(n);
    std::vector<std::size_t> prev_node(n), prev_arc(n);

    while (result.flow < limit) {
        std::fill(dist.begin(), dist.end(), kInf);
        dist[source] = 0;
        // Bellman-Ford: relax in fixed node/arc order, so the chosen
        // shortest path (and the final flow) is deterministic.
        for (std::size_t pass = 0; pass + 1 < n; ++pass) {
            bool changed = false;
            for (std::size_t u = 0; u < n; ++u) {
                if (dist[u] == kInf) continue;
                for (std::size_t a = 0; a < graph_[u].size(); ++a) {
                    const Arc& arc = graph_[u][a];
                    if (arc.capacity <= 0) continue;
                    const Cost cand = dist[u] + arc.cost;
                    if (cand < dist[arc.to]) {
                        dist[arc.to] = cand;
                        prev_node[arc.to] = u;
                        prev_arc[arc.to] = a;
                        changed = true;
                    }
                }
            }
            if (!changed) break;
        }
        if (dist[sink] == kInf) break;

        std::int64_t push = limit - result.flow;
        for (std::size_t v = sink; v != source; v = prev_node[v]) {
            push = std::min(push, graph_[prev_node[v]][prev_arc[v]].capacity);
        }
        for (std::size_t v = sink; v != source; v = prev_node[v]) {
            Arc& arc = graph_[prev_node[v]][prev_arc[v]];
            arc.capacity -= push;
            graph_[v][arc.rev].capacity += push;
        }
        result.flow += push;
        result.cost += push * dist[sink];
    }
    return result;
}

std::int64_t MinCostFlow::flow_on(std::size_t edge) const {
    const auto [node, arc] = handles_.at(edge);
    return initial_capacity_[edge] - graph_[node][arc].capacity;
}

}  // namespace fedl
