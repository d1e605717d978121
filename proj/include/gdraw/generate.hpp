#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "gdraw/error.hpp"
#include "gdraw/graph.hpp"

namespace gdraw {

inline Graph gen_grid(int rows, int cols) {
  if (rows < 2 || cols < 2) detail::fail("grid needs rows, cols >= 2 (got ", rows, "x", cols, ")");
  std::vector<Edge> edges;
  auto id = [cols](int r, int c) { return r * cols + c; };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) edges.emplace_back(id(r, c), id(r, c + 1));
      if (r + 1 < rows) edges.emplace_back(id(r, c), id(r + 1, c));
    }
  }
  return Graph(static_cast<std::size_t>(rows * cols), std::move(edges));
}

// Node 0 is the center, nodes 1..leaves the leaves.
inline Graph gen_star(int leaves) {
  if (leaves < 1) detail::fail("star needs at least one leaf");
  std::vector<Edge> edges;
  for (int v = 1; v <= leaves; ++v) edges.emplace_back(0, v);
  return Graph(static_cast<std::size_t>(leaves + 1), std::move(edges));
}

// Planted-partition parameters for community graphs.
struct ClusteredSpec {
  int n = 30;
  double avg_degree = 4.0;
  int communities = 3;
  double mixing = 0.2;  // expected fraction of a node's edges leaving its community
  int max_degree = 10;
  std::uint64_t seed = 1;
};

struct ClusteredResult {
  Graph graph;
  int attempts = 0;
  bool repaired = false;  // connectivity forced by bridge edges
  double cross_fraction = 0.0;
};

namespace detail {

inline std::vector<int> balanced_communities(int n, int count, std::mt19937_64& rng) {
  std::vector<int> nodes(n);
  std::iota(nodes.begin(), nodes.end(), 0);
  std::shuffle(nodes.begin(), nodes.end(), rng);
  std::vector<int> comm(n);
  for (int i = 0; i < n; ++i) comm[nodes[i]] = i % count;
  return comm;
}

inline double cross_fraction(const Graph& g) {
  if (g.edge_count() == 0) return 0.0;
  const auto& comm = *g.communities();
  std::size_t cross = 0;
  for (auto [u, v] : g.edges()) cross += comm[u] != comm[v];
  return double(cross) / double(g.edge_count());
}

// Joins components into a chain, one edge between consecutive components.
// Each bridge uses the highest-degree node (lowest index on ties) that still
// has room under `max_degree`, falling back to the highest-degree node.
inline std::vector<Edge> bridge_components(std::size_t n, std::vector<Edge> edges, int max_degree) {
  Graph g(n, edges);
  std::vector<int> deg(n);
  for (std::size_t v = 0; v < n; ++v) deg[v] = g.degree(int(v));
  std::vector<char> done(n, 0);
  std::vector<std::vector<int>> comps;
  for (std::size_t s = 0; s < n; ++s) {
    if (done[s]) continue;
    comps.push_back(reachable_from(g, int(s)));
    for (int v : comps.back()) done[v] = 1;
  }
  auto pick = [&](const std::vector<int>& comp) {
    int top = -1;
    for (int v : comp) {
      const bool room = deg[v] < max_degree;
      if (top < 0) {
        top = v;
        continue;
      }
      const bool top_room = deg[top] < max_degree;
      if (room != top_room) {
        if (room) top = v;
      } else if (deg[v] > deg[top] || (deg[v] == deg[top] && v < top)) {
        top = v;
      }
    }
    return top;
  };
  for (std::size_t c = 1; c < comps.size(); ++c) {
    const int a = pick(comps[c - 1]), b = pick(comps[c]);
    edges.emplace_back(a, b);
    ++deg[a];
    ++deg[b];
  }
  return edges;
}

}  // namespace detail

// Node pairs available inside communities under balanced assignment.
inline double intra_capacity(int n, int communities) {
  double pairs = 0.0;
  for (int c = 0; c < communities; ++c) {
    const double size = double(n / communities + (c < n % communities ? 1 : 0));
    pairs += size * (size - 1.0) / 2.0;
  }
  return pairs;
}

// Planted-partition generator standing in for LFR at n <= 50. Pair (i, j)
// is linked with probability proportional to k_i * k_j, reweighted so that a
// fraction `mixing` of the expected edge mass crosses communities.
inline ClusteredResult gen_clustered(const ClusteredSpec& spec) {
  if (spec.n < 2) detail::fail("clustered graph needs n >= 2");
  if (spec.avg_degree < 1.0) detail::fail("infeasible spec: average degree ", spec.avg_degree, " < 1");
  if (spec.avg_degree > spec.n - 1) detail::fail("infeasible spec: average degree exceeds n-1");
  if (spec.communities < 1 || spec.communities > spec.n) detail::fail("community count out of range");
  if (spec.mixing < 0.0 || spec.mixing >= 1.0) detail::fail("mixing fraction must be in [0,1)");
  if (spec.communities == 1 && spec.mixing > 0.0) detail::fail("mixing needs at least two communities");
  if (spec.max_degree < spec.avg_degree) detail::fail("infeasible spec: max degree below average degree");
  if (intra_capacity(spec.n, spec.communities) < (1.0 - spec.mixing) * spec.avg_degree * spec.n / 2.0) {
    detail::fail("infeasible spec: communities too small for the intra-community edge count");
  }

  constexpr int kMaxAttempts = 50;
  const int n = spec.n;
  std::mt19937_64 rng(spec.seed);
  const double target_edges = spec.avg_degree * n / 2.0;

  std::vector<Edge> best_edges;
  std::vector<int> best_comm;
  bool best_valid = false;
  int attempts = 0;
  for (; attempts < kMaxAttempts; ++attempts) {
    auto comm = detail::balanced_communities(n, spec.communities, rng);
    // target degrees uniform in [d - d/2, d + d/2], capped
    std::uniform_real_distribution<double> deg_dist(spec.avg_degree * 0.5, spec.avg_degree * 1.5);
    std::vector<double> k(n);
    for (auto& ki : k) ki = std::min<double>(deg_dist(rng), spec.max_degree);

    double s_in = 0.0, s_out = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) (comm[i] == comm[j] ? s_in : s_out) += k[i] * k[j];
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Edge> edges;
    std::vector<int> deg(n, 0);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const bool same = comm[i] == comm[j];
        const double mass = same ? (s_in > 0 ? (1.0 - spec.mixing) / s_in : 0.0)
                                 : (s_out > 0 ? spec.mixing / s_out : 0.0);
        const double p = std::min(1.0, target_edges * k[i] * k[j] * mass);
        if (unit(rng) < p) {
          edges.emplace_back(i, j);
          ++deg[i];
          ++deg[j];
        }
      }
    }
    const double avg = 2.0 * edges.size() / n;
    const bool degree_ok = std::abs(avg - spec.avg_degree) <= 0.2 * spec.avg_degree &&
                           *std::max_element(deg.begin(), deg.end()) <= spec.max_degree;
    const bool connected = validate_graph(std::size_t(n), edges).empty();
    if (degree_ok && connected) {
      Graph g(std::size_t(n), std::move(edges), std::move(comm));
      return {g, attempts + 1, false, detail::cross_fraction(g)};
    }
    if (degree_ok && !best_valid) {
      best_edges = edges;
      best_comm = comm;
      best_valid = true;
    }
  }
  if (!best_valid) detail::fail("could not meet degree bounds in ", kMaxAttempts, " attempts");
  auto repaired = detail::bridge_components(std::size_t(n), std::move(best_edges), spec.max_degree);
  Graph g(std::size_t(n), std::move(repaired), std::move(best_comm));
  return {g, attempts, true, detail::cross_fraction(g)};
}

// Draws one general-graph spec inside the preset node/community ranges,
// redrawing until the communities can hold the intra-community edge mass.
inline ClusteredSpec sample_general_spec(std::mt19937_64& rng) {
  ClusteredSpec s;
  do {
    s.n = std::uniform_int_distribution<int>(20, 50)(rng);
    s.communities = std::uniform_int_distribution<int>(2, 12)(rng);
    s.avg_degree = std::uniform_real_distribution<double>(2.5, 6.0)(rng);
    s.mixing = std::uniform_real_distribution<double>(0.05, 0.3)(rng);
  } while (intra_capacity(s.n, s.communities) < 2.0 * (1.0 - s.mixing) * s.avg_degree * s.n / 2.0);
  s.max_degree = 10;
  s.seed = rng();
  return s;
}

struct GeneralSample {
  ClusteredSpec spec;
  ClusteredResult result;
  int redraws = 0;  // specs abandoned because no sample met the degree bounds
};

// One general graph; a spec whose samples keep missing the degree bounds is
// replaced by a fresh draw.
inline GeneralSample sample_general_graph(std::mt19937_64& rng) {
  for (int redraws = 0;; ++redraws) {
    const auto spec = sample_general_spec(rng);
    try {
      return {spec, gen_clustered(spec), redraws};
    } catch (const Error&) {
      if (redraws >= 100) throw;
    }
  }
}

enum class Split { train, val, test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  detail::fail("unknown split label '", s, "'");
}

struct SplitResult {
  std::vector<Split> labels;      // per input graph
  std::vector<std::size_t> kept;  // input indices that survive dedup, in input order
  std::size_t evicted = 0;
  std::vector<std::string> warnings;
};

// Random split by fractions {train, val, test}. Val/test graphs whose WL hash
// matches any training graph are evicted.
inline SplitResult split_dataset(const std::vector<Graph>& graphs, std::array<double, 3> fractions,
                                 std::uint64_t seed) {
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9) detail::fail("split fractions must sum to 1 (got ", total, ")");
  for (double f : fractions) {
    if (f < 0.0) detail::fail("split fractions must be non-negative");
  }
  const std::size_t n = graphs.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);

  const auto n_train = static_cast<std::size_t>(std::llround(fractions[0] * double(n)));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(fractions[1] * double(n))));

  SplitResult out;
  out.labels.assign(n, Split::test);
  std::unordered_set<std::string> train_hashes;
  for (std::size_t r = 0; r < n; ++r) {
    const Split s = r < n_train ? Split::train : (r < n_train + n_val ? Split::val : Split::test);
    out.labels[idx[r]] = s;
    if (s == Split::train) train_hashes.insert(wl_hash(graphs[idx[r]]));
  }
  std::size_t held_out = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (out.labels[i] != Split::train && train_hashes.count(wl_hash(graphs[i]))) {
      ++out.evicted;
      continue;
    }
    held_out += out.labels[i] != Split::train;
    out.kept.push_back(i);
  }
  if (held_out == 0 && n_train < n) {
    out.warnings.emplace_back("validation and test splits are empty after deduplication");
  }
  return out;
}

}  // namespace gdraw
