#include "graphdistill/graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <string>

namespace gd {

Graph::Graph(int node_count, std::vector<std::pair<int, int>> edges)
    : node_count_(node_count) {
    if (node_count < 0) throw std::invalid_argument("graph: negative node count");
    for (auto& e : edges) {
        if (e.first == e.second)
            throw std::invalid_argument("graph: self-loop at node " + std::to_string(e.first));
        if (e.first > e.second) std::swap(e.first, e.second);
        if (e.first < 0 || e.second >= node_count)
            throw std::invalid_argument("graph: edge endpoint out of range: (" +
                                        std::to_string(e.first) + "," +
                                        std::to_string(e.second) + ")");
    }
    std::sort(edges.begin(), edges.end());
    if (std::adjacent_find(edges.begin(), edges.end()) != edges.end())
        throw std::invalid_argument("graph: duplicate edge");
    edges_ = std::move(edges);
    adjacency_.assign(node_count_, {});
    for (const auto& [i, j] : edges_) {
        adjacency_[i].push_back(j);
        adjacency_[j].push_back(i);
    }
    for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());
}

double density(const Graph& g) {
    int n = g.node_count();
    if (n < 2) throw std::domain_error("density: undefined for graphs with fewer than 2 nodes");
    return 2.0 * g.edge_count() / (static_cast<double>(n) * (n - 1));
}

namespace {

// Hop distances from src; -1 marks unreachable nodes.
std::vector<int> bfs_distances(const Graph& g, int src) {
    std::vector<int> dist(g.node_count(), -1);
    std::queue<int> q;
    dist[src] = 0;
    q.push(src);
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        for (int v : g.adjacency()[u]) {
            if (dist[v] == -1) {
                dist[v] = dist[u] + 1;
                q.push(v);
            }
        }
    }
    return dist;
}

} // namespace

std::vector<std::vector<int>> connected_components(const Graph& g) {
    int n = g.node_count();
    std::vector<char> seen(n, 0);
    std::vector<std::vector<int>> components;
    for (int s = 0; s < n; ++s) {
        if (seen[s]) continue;
        std::vector<int> comp;
        std::queue<int> q;
        seen[s] = 1;
        q.push(s);
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            comp.push_back(u);
            for (int v : g.adjacency()[u]) {
                if (!seen[v]) {
                    seen[v] = 1;
                    q.push(v);
                }
            }
        }
        std::sort(comp.begin(), comp.end());
        components.push_back(std::move(comp));
    }
    // Seeds are visited in ascending order, so components are already sorted
    // by smallest member.
    return components;
}

int diameter(const Graph& g) {
    if (g.node_count() < 1) throw std::domain_error("diameter: empty graph");
    auto components = connected_components(g);
    // Largest by node count; first wins ties (components are ordered by
    // smallest member).
    const std::vector<int>* largest = &components[0];
    for (const auto& c : components)
        if (c.size() > largest->size()) largest = &c;
    int diam = 0;
    for (int src : *largest) {
        auto dist = bfs_distances(g, src);
        for (int v : *largest) diam = std::max(diam, dist[v]);
    }
    return diam;
}

Graph er_graph(int n, double p, Rng& rng) {
    if (n < 0) throw std::invalid_argument("er_graph: negative node count");
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("er_graph: p outside [0,1]");
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng.uniform() < p) edges.emplace_back(i, j);
    return Graph(n, std::move(edges));
}

Graph ba_graph(int n, int k, Rng& rng) {
    if (n < 1) throw std::invalid_argument("ba_graph: need at least one node");
    if (k < 1 || k >= n) throw std::invalid_argument("ba_graph: need 1 <= k < n");
    std::vector<std::pair<int, int>> edges;
    std::vector<double> degree(n, 0.0);
    for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) edges.emplace_back(i, j);
        degree[i] = k - 1;
    }
    std::vector<char> chosen(n, 0);
    for (int v = k; v < n; ++v) {
        std::fill(chosen.begin(), chosen.begin() + v, 0);
        for (int draw = 0; draw < k; ++draw) {
            double total = 0.0;
            for (int t = 0; t < v; ++t)
                if (!chosen[t]) total += degree[t];
            int target = -1;
            if (total > 0.0) {
                double r = rng.uniform() * total;
                double cum = 0.0;
                for (int t = 0; t < v; ++t) {
                    if (chosen[t]) continue;
                    cum += degree[t];
                    if (r < cum) {
                        target = t;
                        break;
                    }
                }
                if (target < 0) { // r landed on the top edge of the last bin
                    for (int t = v - 1; t >= 0; --t)
                        if (!chosen[t] && degree[t] > 0.0) {
                            target = t;
                            break;
                        }
                }
            } else {
                // Every unchosen candidate has zero degree (k = 1 seed);
                // fall back to a uniform draw among them.
                int unchosen = 0;
                for (int t = 0; t < v; ++t)
                    if (!chosen[t]) ++unchosen;
                auto pick = rng.below(static_cast<std::uint64_t>(unchosen));
                for (int t = 0; t < v; ++t) {
                    if (chosen[t]) continue;
                    if (pick == 0) {
                        target = t;
                        break;
                    }
                    --pick;
                }
            }
            chosen[target] = 1;
            edges.emplace_back(target, v);
        }
        // Degrees update only after the node has chosen all k targets.
        for (std::size_t e = edges.size() - k; e < edges.size(); ++e)
            degree[edges[e].first] += 1.0;
        degree[v] = k;
    }
    return Graph(n, std::move(edges));
}

namespace {

int sample_node_count(double mean, double stddev, int n_min, Rng& rng) {
    long n = std::lround(rng.normal(mean, stddev));
    return std::max<long>(n, n_min);
}

} // namespace

Graph generate_er(const ErParams& params, Rng& rng) {
    if (params.n_min < 1) throw std::invalid_argument("generate_er: n_min must be >= 1");
    if (!(params.p_min > 0.0 && params.p_min <= 1.0))
        throw std::invalid_argument("generate_er: p_min must be in (0,1]");
    int n = sample_node_count(params.n_mean, params.n_std, params.n_min, rng);
    double p = rng.normal(params.p_mean, params.p_std);
    p = std::min(1.0, std::max(params.p_min, p));
    return er_graph(n, p, rng);
}

Graph generate_ba(const BaParams& params, Rng& rng) {
    if (params.n_min < 1) throw std::invalid_argument("generate_ba: n_min must be >= 1");
    if (params.k_min < 1) throw std::invalid_argument("generate_ba: k_min must be >= 1");
    int n = sample_node_count(params.n_mean, params.n_std, params.n_min, rng);
    long ks = std::lround(rng.normal(params.k_mean, params.k_std));
    int k = static_cast<int>(std::max<long>(params.k_min,
                                            std::min<long>(ks, n - params.k_max_offset)));
    k = std::min(k, n - 1); // keep attachment well-defined for tiny n
    k = std::max(k, 1);
    return ba_graph(n, k, rng);
}

Graph permute(const Graph& g, const std::vector<int>& perm) {
    int n = g.node_count();
    if (static_cast<int>(perm.size()) != n)
        throw std::invalid_argument("permute: permutation size mismatch");
    std::vector<char> seen(n, 0);
    for (int v : perm) {
        if (v < 0 || v >= n || seen[v])
            throw std::invalid_argument("permute: not a bijection on 0..n-1");
        seen[v] = 1;
    }
    std::vector<std::pair<int, int>> edges;
    edges.reserve(g.edges().size());
    for (const auto& [i, j] : g.edges()) edges.emplace_back(perm[i], perm[j]);
    return Graph(n, std::move(edges));
}

} // namespace gd
