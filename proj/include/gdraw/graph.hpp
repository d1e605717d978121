#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gdraw/error.hpp"

namespace gdraw {

using Edge = std::pair<int, int>;

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

// Per-node 2D coordinates. Whether index i means "node i" or "sequence
// position i" is decided by whoever pairs the layout with a graph.
using Layout = std::vector<Point>;

// Structural problems of a raw edge list (simple, undirected, in range).
inline std::vector<std::string> structural_violations(std::size_t n, std::span<const Edge> edges,
                                                      const std::vector<int>* communities = nullptr) {
  std::vector<std::string> out;
  if (n == 0) out.emplace_back("graph has no nodes");
  std::vector<Edge> seen;
  seen.reserve(edges.size());
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= n || static_cast<std::size_t>(v) >= n) {
      out.push_back("edge (" + std::to_string(u) + "," + std::to_string(v) + ") out of range");
      continue;
    }
    if (u == v) {
      out.push_back("self-loop at node " + std::to_string(u));
      continue;
    }
    seen.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(seen.begin(), seen.end());
  for (std::size_t i = 1; i < seen.size(); ++i) {
    if (seen[i] == seen[i - 1]) {
      out.push_back("duplicate edge (" + std::to_string(seen[i].first) + "," +
                    std::to_string(seen[i].second) + ")");
    }
  }
  if (communities != nullptr) {
    if (communities->size() != n) out.emplace_back("community list length differs from node count");
    for (int c : *communities) {
      if (c < 0) {
        out.emplace_back("negative community id");
        break;
      }
    }
  }
  return out;
}

// Immutable undirected simple graph with optional community labels.
class Graph {
 public:
  Graph() = default;

  Graph(std::size_t n, std::vector<Edge> edges, std::optional<std::vector<int>> communities = std::nullopt)
      : n_(n), communities_(std::move(communities)) {
    auto bad = structural_violations(n, edges, communities_ ? &*communities_ : nullptr);
    if (!bad.empty()) detail::fail("invalid graph: ", bad.front());
    for (auto& e : edges) {
      if (e.first > e.second) std::swap(e.first, e.second);
    }
    std::sort(edges.begin(), edges.end());
    edges_ = std::move(edges);
    adj_.assign(n_, {});
    for (auto [u, v] : edges_) {
      adj_[u].push_back(v);
      adj_[v].push_back(u);
    }
    for (auto& a : adj_) std::sort(a.begin(), a.end());
  }

  std::size_t size() const { return n_; }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<int>& neighbors(int v) const { return adj_[v]; }
  int degree(int v) const { return static_cast<int>(adj_[v].size()); }
  bool has_communities() const { return communities_.has_value(); }
  const std::optional<std::vector<int>>& communities() const { return communities_; }

  bool has_edge(int u, int v) const {
    const auto& a = adj_[u];
    return std::binary_search(a.begin(), a.end(), v);
  }

  int max_degree() const {
    int d = 0;
    for (std::size_t v = 0; v < n_; ++v) d = std::max(d, degree(static_cast<int>(v)));
    return d;
  }

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.n_ == b.n_ && a.edges_ == b.edges_ && a.communities_ == b.communities_;
  }

 private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adj_;
  std::optional<std::vector<int>> communities_;
};

// Nodes reachable from `start`, in plain BFS discovery order.
inline std::vector<int> reachable_from(const Graph& g, int start) {
  std::vector<char> seen(g.size(), 0);
  std::vector<int> queue{start};
  seen[start] = 1;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    for (int w : g.neighbors(queue[head])) {
      if (!seen[w]) {
        seen[w] = 1;
        queue.push_back(w);
      }
    }
  }
  return queue;
}

inline bool is_connected(const Graph& g) {
  return g.size() > 0 && reachable_from(g, 0).size() == g.size();
}

// Returns every violation found; empty means the graph is a valid input.
inline std::vector<std::string> validate_graph(std::size_t n, std::span<const Edge> edges) {
  auto out = structural_violations(n, edges);
  if (n == 0) return out;
  // connectivity is still checked over the in-range edges of a broken list
  std::vector<std::vector<int>> adj(n);
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= n || static_cast<std::size_t>(v) >= n) continue;
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  std::vector<char> seen(n, 0);
  std::vector<int> queue{0};
  seen[0] = 1;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    for (int w : adj[queue[head]]) {
      if (!seen[w]) {
        seen[w] = 1;
        queue.push_back(w);
      }
    }
  }
  if (queue.size() != n) {
    out.push_back("graph is disconnected: " + std::to_string(n - queue.size()) +
                  " node(s) unreachable from node 0");
  }
  return out;
}

inline std::vector<std::string> validate_graph(const Graph& g) {
  return validate_graph(g.size(), g.edges());
}

// BFS levels from `start`. Each level is sorted by descending degree, then
// ascending node index, before the next level is expanded.
inline std::vector<std::vector<int>> bfs_levels(const Graph& g, int start) {
  if (start < 0 || static_cast<std::size_t>(start) >= g.size()) {
    detail::fail("bfs start ", start, " out of range [0, ", g.size(), ")");
  }
  std::vector<char> seen(g.size(), 0);
  std::vector<std::vector<int>> levels{{start}};
  seen[start] = 1;
  std::size_t visited = 1;
  while (true) {
    std::vector<int> next;
    for (int v : levels.back()) {
      for (int w : g.neighbors(v)) {
        if (!seen[w]) {
          seen[w] = 1;
          next.push_back(w);
        }
      }
    }
    if (next.empty()) break;
    std::sort(next.begin(), next.end(), [&](int a, int b) {
      if (g.degree(a) != g.degree(b)) return g.degree(a) > g.degree(b);
      return a < b;
    });
    visited += next.size();
    levels.push_back(std::move(next));
  }
  if (visited != g.size()) {
    detail::fail("graph is disconnected: ", g.size() - visited, " node(s) unreachable from node ", start);
  }
  return levels;
}

inline std::vector<int> bfs_order(const Graph& g, int start) {
  std::vector<int> order;
  order.reserve(g.size());
  for (const auto& level : bfs_levels(g, start)) order.insert(order.end(), level.begin(), level.end());
  return order;
}

// Node permutation plus the per-position adjacency vectors fed to the model.
struct NodeSequence {
  std::vector<int> order;
  std::size_t k = 0;
  std::vector<std::uint8_t> vectors;  // order.size() rows of k entries

  std::size_t size() const { return order.size(); }
  std::span<const std::uint8_t> row(std::size_t i) const { return {vectors.data() + i * k, k}; }
};

// vectors[i][j-1] = 1 iff order[i] is adjacent to order[i-j], 1 <= j <= min(i, k).
inline NodeSequence encode_adjacency_vectors(const Graph& g, std::vector<int> order, std::size_t k) {
  if (k == 0) detail::fail("adjacency vector size must be positive");
  if (order.size() != g.size()) detail::fail("order has ", order.size(), " entries, graph has ", g.size(), " nodes");
  std::vector<char> used(g.size(), 0);
  for (int v : order) {
    if (v < 0 || static_cast<std::size_t>(v) >= g.size() || used[v]) detail::fail("order is not a permutation");
    used[v] = 1;
  }
  NodeSequence seq;
  seq.k = k;
  seq.vectors.assign(order.size() * k, 0);
  for (std::size_t i = 1; i < order.size(); ++i) {
    const std::size_t span = std::min(i, k);
    for (std::size_t j = 1; j <= span; ++j) {
      if (g.has_edge(order[i], order[i - j])) seq.vectors[i * k + (j - 1)] = 1;
    }
  }
  seq.order = std::move(order);
  return seq;
}

inline NodeSequence encode_bfs_sequence(const Graph& g, int start, std::size_t k) {
  return encode_adjacency_vectors(g, bfs_order(g, start), k);
}

// Maximum BFS level width M for a BFS ordering; every edge spans at most 2M
// positions in such an ordering.
inline std::size_t bfs_width_bound(const Graph& g, std::span<const int> order) {
  if (order.empty()) return 0;
  std::size_t widest = 0;
  for (const auto& level : bfs_levels(g, order.front())) widest = std::max(widest, level.size());
  return widest;
}

namespace detail {

inline std::uint64_t fnv1a(std::uint64_t h, std::uint64_t word) {
  for (int i = 0; i < 8; ++i) {
    h ^= (word >> (8 * i)) & 0xffu;
    h *= 0x100000001b3ull;
  }
  return h;
}

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;

}  // namespace detail

// Weisfeiler-Lehman color-refinement digest. Isomorphic graphs always
// collide; some non-isomorphic regular pairs (C6 vs 2xC3) collide as well.
inline std::string wl_hash(const Graph& g, int rounds = 3) {
  if (rounds < 1) detail::fail("wl_hash needs at least one round");
  const std::size_t n = g.size();
  std::vector<std::uint64_t> color(n);
  for (std::size_t v = 0; v < n; ++v) color[v] = detail::fnv1a(detail::kFnvOffset, g.degree(int(v)));

  std::vector<std::uint64_t> history(color);
  std::vector<std::uint64_t> next(n), nb;
  for (int r = 0; r < rounds; ++r) {
    for (std::size_t v = 0; v < n; ++v) {
      nb.clear();
      for (int w : g.neighbors(int(v))) nb.push_back(color[w]);
      std::sort(nb.begin(), nb.end());
      std::uint64_t h = detail::fnv1a(detail::kFnvOffset, color[v]);
      for (auto c : nb) h = detail::fnv1a(h, c);
      next[v] = h;
    }
    color.swap(next);
    history.insert(history.end(), color.begin(), color.end());
  }
  std::sort(history.begin(), history.end());
  std::uint64_t h = detail::fnv1a(detail::kFnvOffset, n);
  h = detail::fnv1a(h, g.edge_count());
  for (auto c : history) h = detail::fnv1a(h, c);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Relabels node v as perm[v]. Communities move with their nodes.
inline Graph relabel(const Graph& g, std::span<const int> perm) {
  std::vector<Edge> edges;
  edges.reserve(g.edge_count());
  for (auto [u, v] : g.edges()) edges.emplace_back(perm[u], perm[v]);
  std::optional<std::vector<int>> comm;
  if (g.has_communities()) {
    comm.emplace(g.size());
    for (std::size_t v = 0; v < g.size(); ++v) (*comm)[perm[v]] = (*g.communities())[v];
  }
  return Graph(g.size(), std::move(edges), std::move(comm));
}

}  // namespace gdraw
