#pragma once

// Helpers shared by the test binaries.

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "gdraw/autodiff.hpp"
#include "gdraw/graph.hpp"
#include "gdraw/train.hpp"

namespace gdraw::testing {

// Random spanning tree plus extra uniform edges; always connected.
inline Graph random_connected(int n, double extra_density, std::mt19937_64& rng) {
  std::vector<Edge> edges;
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (int i = 1; i < n; ++i) {
    std::uniform_int_distribution<int> pick(0, i - 1);
    edges.emplace_back(perm[pick(rng)], perm[i]);
  }
  std::bernoulli_distribution coin(extra_density);
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      if (coin(rng)) edges.emplace_back(u, v);
    }
  }
  std::sort(edges.begin(), edges.end(), [](Edge a, Edge b) {
    return std::minmax(a.first, a.second) < std::minmax(b.first, b.second);
  });
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [](Edge a, Edge b) { return std::minmax(a.first, a.second) == std::minmax(b.first, b.second); }),
              edges.end());
  return Graph(std::size_t(n), std::move(edges));
}

inline Layout random_layout(std::size_t n, std::mt19937_64& rng, double scale = 100.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Layout l(n);
  for (auto& p : l) p = {u(rng), u(rng)};
  return l;
}

inline Graph path_graph(int n) {
  std::vector<Edge> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return Graph(std::size_t(n), std::move(e));
}

inline Graph cycle_graph(int n) {
  std::vector<Edge> e;
  for (int i = 0; i < n; ++i) e.emplace_back(i, (i + 1) % n);
  return Graph(std::size_t(n), std::move(e));
}

inline std::vector<double> flat_params(const ModelParams<double>& p) {
  std::vector<double> out;
  for (const auto& t : p.tensors) out.insert(out.end(), t.data.begin(), t.data.end());
  return out;
}

inline void load_flat(ModelParams<double>& p, std::span<const double> flat) {
  std::size_t off = 0;
  for (auto& t : p.tensors) {
    std::copy(flat.begin() + off, flat.begin() + off + t.data.size(), t.data.begin());
    off += t.data.size();
  }
}

// Flat indices of every parameter except the readout bias. The loss centers
// its input, so that bias has an identically zero gradient and only
// finite-difference noise to compare against.
inline std::vector<std::size_t> checkable_coords(const ModelParams<double>& p) {
  std::vector<std::size_t> out;
  std::size_t off = 0;
  for (const auto& t : p.tensors) {
    if (t.name != "readout.b") {
      for (std::size_t i = 0; i < t.data.size(); ++i) out.push_back(off + i);
    }
    off += t.data.size();
  }
  return out;
}

// Model + Procrustes loss on one sample as a function of the flat parameter
// vector, for gradient_check.
inline ad::GradFn model_loss_fn(ModelParams<double> proto, TrainSample<double> sample) {
  return [proto = std::move(proto), sample = std::move(sample)](std::span<const double> p,
                                                                std::span<double> g) mutable {
    load_flat(proto, p);
    if (g.empty()) return sample_loss(proto, sample);
    auto grads = proto.zeros_like();
    const double loss = sample_loss(proto, sample, &grads);
    const auto flat = flat_params(grads);
    std::copy(flat.begin(), flat.end(), g.begin());
    return loss;
  };
}

// Second crossing counter, written against integer coordinates with exact
// 64-bit arithmetic: solve p + t r = q + u s for the parameters as fractions
// and require both strictly inside (0, 1), the open segments.
struct Frac {
  std::int64_t num, den;  // den > 0
};

inline bool in_open_unit(Frac f) { return f.num > 0 && f.num < f.den; }

inline bool segments_meet(Point a, Point b, Point c, Point d) {
  const auto ax = std::int64_t(a.x), ay = std::int64_t(a.y), bx = std::int64_t(b.x), by = std::int64_t(b.y);
  const auto cx = std::int64_t(c.x), cy = std::int64_t(c.y), dx = std::int64_t(d.x), dy = std::int64_t(d.y);
  const std::int64_t rx = bx - ax, ry = by - ay, sx = dx - cx, sy = dy - cy;
  const std::int64_t qpx = cx - ax, qpy = cy - ay;
  const std::int64_t denom = rx * sy - ry * sx;
  if (denom != 0) {
    Frac t{qpx * sy - qpy * sx, denom}, u{qpx * ry - qpy * rx, denom};
    if (t.den < 0) t = {-t.num, -t.den};
    if (u.den < 0) u = {-u.num, -u.den};
    return in_open_unit(t) && in_open_unit(u);
  }
  // parallel or degenerate: a positive-length overlap on one line
  const std::int64_t len = rx * rx + ry * ry;
  if (len == 0 || (sx == 0 && sy == 0)) return false;
  if (qpx * ry - qpy * rx != 0) return false;
  const std::int64_t t0 = qpx * rx + qpy * ry;
  const std::int64_t t1 = (dx - ax) * rx + (dy - ay) * ry;
  return std::max<std::int64_t>(0, std::min(t0, t1)) < std::min(len, std::max(t0, t1));
}

inline std::size_t brute_force_crossings(const Graph& g, const Layout& l) {
  std::size_t count = 0;
  const auto& e = g.edges();
  for (std::size_t i = 0; i < e.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      std::set<int> ends{e[i].first, e[i].second, e[j].first, e[j].second};
      if (ends.size() < 4) continue;
      count += segments_meet(l[e[i].first], l[e[i].second], l[e[j].first], l[e[j].second]);
    }
  }
  return count;
}

}  // namespace gdraw::testing
