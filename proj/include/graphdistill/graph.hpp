#ifndef GRAPHDISTILL_GRAPH_HPP
#define GRAPHDISTILL_GRAPH_HPP

#include <utility>
#include <vector>

#include "graphdistill/rng.hpp"

namespace gd {

/// Undirected, unweighted simple graph. Immutable after construction.
/// Edges are stored canonically as (i, j) with i < j, sorted lexicographically.
class Graph {
public:
    Graph() = default;
    Graph(int node_count, std::vector<std::pair<int, int>> edges);

    int node_count() const { return node_count_; }
    int edge_count() const { return static_cast<int>(edges_.size()); }
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }
    const std::vector<std::vector<int>>& adjacency() const { return adjacency_; }
    int degree(int v) const { return static_cast<int>(adjacency_[v].size()); }

    bool operator==(const Graph& other) const {
        return node_count_ == other.node_count_ && edges_ == other.edges_;
    }

private:
    int node_count_ = 0;
    std::vector<std::pair<int, int>> edges_;
    std::vector<std::vector<int>> adjacency_;
};

/// Erdős–Rényi sampling parameters. Node count ~ round(N(n_mean, n_std²))
/// clamped below at n_min; edge probability ~ N(p_mean, p_std²) clamped to
/// [p_min, 1].
struct ErParams {
    double n_mean = 30.0;
    double n_std = 10.0;
    int n_min = 5;
    double p_mean = 0.3;
    double p_std = 0.12;
    double p_min = 0.05;
};

/// Barabási–Albert sampling parameters. Attachment count ~ round(N(k_mean,
/// k_std²)) clamped to [k_min, n - k_max_offset].
struct BaParams {
    double n_mean = 30.0;
    double n_std = 10.0;
    int n_min = 5;
    double k_mean = 6.0;
    double k_std = 2.0;
    int k_min = 2;
    int k_max_offset = 3;
};

/// 2|E| / (n(n-1)). Throws std::domain_error for n < 2.
double density(const Graph& g);

/// Longest shortest-path hop count within the largest connected component
/// (largest by node count, ties broken by smallest contained node index).
/// Single-node graph -> 0. Requires n >= 1.
int diameter(const Graph& g);

/// Partition of 0..n-1 into maximal connected sets. Members ascending,
/// components ordered by smallest member.
std::vector<std::vector<int>> connected_components(const Graph& g);

/// G(n, p): each of the n(n-1)/2 pairs kept independently with probability p.
Graph er_graph(int n, double p, Rng& rng);

/// Preferential attachment: complete-graph seed on k nodes, then each new
/// node attaches to k distinct existing nodes by repeated degree-proportional
/// draws without replacement. Requires 1 <= k < n. Resulting edge count is
/// exactly k(k-1)/2 + k(n-k), and the graph is connected.
Graph ba_graph(int n, int k, Rng& rng);

Graph generate_er(const ErParams& params, Rng& rng);
Graph generate_ba(const BaParams& params, Rng& rng);

/// Relabels nodes: node v becomes perm[v]. Throws std::invalid_argument if
/// perm is not a bijection on 0..n-1.
Graph permute(const Graph& g, const std::vector<int>& perm);

} // namespace gd

#endif
