#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "gdraw/error.hpp"
#include "gdraw/graph.hpp"

namespace gdraw {

namespace detail {

inline double orient(Point a, Point b, Point c) { return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x); }

}  // namespace detail

enum class SegmentContact { none, proper, collinear_overlap };

// Contact between the open segments ab and cd (assumed to share no
// endpoint). Touching at an endpoint is not a contact; collinear segments
// count only when they overlap over a positive length.
inline SegmentContact segment_contact(Point a, Point b, Point c, Point d) {
  const double o1 = detail::orient(a, b, c), o2 = detail::orient(a, b, d);
  const double o3 = detail::orient(c, d, a), o4 = detail::orient(c, d, b);
  if (((o1 > 0 && o2 < 0) || (o1 < 0 && o2 > 0)) && ((o3 > 0 && o4 < 0) || (o3 < 0 && o4 > 0))) {
    return SegmentContact::proper;
  }
  if (o1 != 0 || o2 != 0) return SegmentContact::none;
  // collinear: compare the projections onto ab
  const double rx = b.x - a.x, ry = b.y - a.y;
  const double len = rx * rx + ry * ry;
  const double t0 = (c.x - a.x) * rx + (c.y - a.y) * ry;
  const double t1 = (d.x - a.x) * rx + (d.y - a.y) * ry;
  if (len == 0 || t0 == t1) return SegmentContact::none;
  const double lo = std::max(0.0, std::min(t0, t1)), hi = std::min(len, std::max(t0, t1));
  return lo < hi ? SegmentContact::collinear_overlap : SegmentContact::none;
}

struct CrossingCount {
  std::size_t crossings = 0;
  std::size_t collinear = 0;  // included in `crossings`
};

// Edge pairs without a shared endpoint whose open segments intersect.
// Collinear overlaps count as crossings and are reported separately.
inline CrossingCount count_edge_crossings_detailed(const Graph& g, const Layout& l) {
  if (l.size() != g.size()) detail::fail("layout has ", l.size(), " points for ", g.size(), " nodes");
  const auto& e = g.edges();
  CrossingCount out;
  for (std::size_t i = 0; i < e.size(); ++i) {
    for (std::size_t j = i + 1; j < e.size(); ++j) {
      const auto [a, b] = e[i];
      const auto [c, d] = e[j];
      if (a == c || a == d || b == c || b == d) continue;
      switch (segment_contact(l[a], l[b], l[c], l[d])) {
        case SegmentContact::proper: ++out.crossings; break;
        case SegmentContact::collinear_overlap:
          ++out.crossings;
          ++out.collinear;
          break;
        case SegmentContact::none: break;
      }
    }
  }
  return out;
}

inline std::size_t count_edge_crossings(const Graph& g, const Layout& l) {
  return count_edge_crossings_detailed(g, l).crossings;
}

// C(|E|, 2) minus the pairs that share an endpoint.
inline std::size_t max_crossings(const Graph& g) {
  const std::size_t m = g.edge_count();
  std::size_t total = m * (m - (m > 0 ? 1 : 0)) / 2;
  for (std::size_t v = 0; v < g.size(); ++v) {
    const std::size_t d = std::size_t(g.degree(int(v)));
    total -= d * (d - (d > 0 ? 1 : 0)) / 2;
  }
  return total;
}

inline double metric_edge_crossing(const Graph& g, const Layout& l) {
  const std::size_t cmax = max_crossings(g);
  if (cmax == 0) return 0.0;
  return double(count_edge_crossings(g, l)) / double(cmax);
}

// Union area of equal node disks over their summed area, by rasterizing the
// bounding box on a grid of cell size radius / 16.
inline double metric_node_occlusion(const Layout& l, double radius = 8.0) {
  if (!(radius > 0.0)) detail::fail("node radius must be positive");
  const std::size_t n = l.size();
  if (n == 0) return 1.0;
  const double cell = radius / 16.0;
  double x0 = l[0].x, x1 = l[0].x, y0 = l[0].y, y1 = l[0].y;
  for (const auto& p : l) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  x0 -= radius;
  y0 -= radius;
  const auto cols = std::size_t(std::ceil((x1 + radius - x0) / cell)) + 1;
  const auto rows = std::size_t(std::ceil((y1 + radius - y0) / cell)) + 1;
  std::vector<char> covered(rows * cols, 0);
  const double r2 = radius * radius;
  std::size_t count = 0;
  for (const auto& p : l) {
    const auto c_lo = std::size_t(std::max(0.0, std::floor((p.x - radius - x0) / cell)));
    const auto c_hi = std::min(cols - 1, std::size_t(std::ceil((p.x + radius - x0) / cell)));
    const auto r_lo = std::size_t(std::max(0.0, std::floor((p.y - radius - y0) / cell)));
    const auto r_hi = std::min(rows - 1, std::size_t(std::ceil((p.y + radius - y0) / cell)));
    for (std::size_t r = r_lo; r <= r_hi; ++r) {
      const double cy = y0 + (double(r) + 0.5) * cell - p.y;
      for (std::size_t c = c_lo; c <= c_hi; ++c) {
        const double cx = x0 + (double(c) + 0.5) * cell - p.x;
        if (cx * cx + cy * cy <= r2) {
          char& slot = covered[r * cols + c];
          count += slot == 0;
          slot = 1;
        }
      }
    }
  }
  const double union_area = double(count) * cell * cell;
  const double ratio = union_area / (double(n) * std::numbers::pi * r2);
  return std::clamp(ratio, 1.0 / double(n), 1.0);
}

// Distance-weighted k-nearest-neighbour community agreement. Distances are
// divided by the layout's RMS radius so the value ignores uniform scaling.
inline double metric_community_overlap(const Graph& g, const Layout& l, std::size_t k_nn = 5) {
  if (!g.has_communities()) detail::fail("community overlap needs community labels");
  if (k_nn == 0) detail::fail("k_nn must be at least 1");
  if (l.size() != g.size()) detail::fail("layout has ", l.size(), " points for ", g.size(), " nodes");
  const auto& comm = *g.communities();
  const std::size_t n = l.size();
  if (n < 2) return 1.0;
  double mx = 0.0, my = 0.0;
  for (const auto& p : l) {
    mx += p.x / double(n);
    my += p.y / double(n);
  }
  double ss = 0.0;
  for (const auto& p : l) ss += (p.x - mx) * (p.x - mx) + (p.y - my) * (p.y - my);
  const double rms = std::sqrt(ss / double(n));
  const double unit = rms > 0.0 ? rms : 1.0;

  double same = 0.0, total = 0.0;
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t i = 0; i < n; ++i) {
    dist.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) dist.emplace_back(std::hypot(l[i].x - l[j].x, l[i].y - l[j].y) / unit, j);
    }
    const std::size_t kk = std::min(k_nn, dist.size());
    std::partial_sort(dist.begin(), dist.begin() + std::ptrdiff_t(kk), dist.end());
    for (std::size_t r = 0; r < kk; ++r) {
      const double w = 1.0 / (1.0 + dist[r].first);
      total += w;
      if (comm[i] == comm[dist[r].second]) same += w;
    }
  }
  return total > 0.0 ? same / total : 1.0;
}

inline double rmse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) detail::fail("rmse: length mismatch (", a.size(), " vs ", b.size(), ")");
  if (a.empty()) detail::fail("rmse: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (b[i] - a[i]) * (b[i] - a[i]);
  return std::sqrt(acc / double(a.size()));
}

struct AestheticValues {
  double edge_crossing = 0.0;
  double node_occlusion = 0.0;
  double community_overlap = 0.0;
};

inline AestheticValues aesthetics(const Graph& g, const Layout& l, double radius = 8.0) {
  AestheticValues v;
  v.edge_crossing = g.edge_count() >= 2 ? metric_edge_crossing(g, l) : 0.0;
  v.node_occlusion = metric_node_occlusion(l, radius);
  v.community_overlap = g.has_communities() ? metric_community_overlap(g, l) : 1.0;
  return v;
}

// Per-graph mean wall-clock seconds of `draw` over `repeats` runs.
inline std::vector<double> time_layout(const std::function<void(const Graph&)>& draw, std::span<const Graph> graphs,
                                       int repeats = 10) {
  if (repeats < 1) detail::fail("time_layout needs repeats >= 1");
  std::vector<double> out;
  out.reserve(graphs.size());
  for (const auto& g : graphs) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < repeats; ++r) draw(g);
    out.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / repeats);
  }
  return out;
}

}  // namespace gdraw
