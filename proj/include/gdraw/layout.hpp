#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "gdraw/error.hpp"
#include "gdraw/graph.hpp"

namespace gdraw {

struct Canvas {
  double width = 800.0;
  double height = 800.0;
  double margin = 40.0;
};

// Non-fatal conditions an engine wants to report (degenerate input, repairs).
using Diagnostics = std::vector<std::string>;

namespace detail {

inline void note(Diagnostics* diag, std::string msg) {
  if (diag != nullptr) diag->push_back(std::move(msg));
}

}  // namespace detail

// Uniform scale + translation placing the bounding box centered inside the
// canvas minus margin. Aspect ratio is preserved.
inline Layout normalize_to_canvas(const Layout& l, const Canvas& canvas = {}, Diagnostics* diag = nullptr) {
  if (l.empty()) return {};
  double x0 = l[0].x, x1 = l[0].x, y0 = l[0].y, y1 = l[0].y;
  for (const auto& p : l) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  const double cx = 0.5 * canvas.width, cy = 0.5 * canvas.height;
  const double w = x1 - x0, h = y1 - y0;
  if (w <= 0.0 && h <= 0.0) {
    detail::note(diag, "all points coincide; mapped to canvas center");
    return Layout(l.size(), Point{cx, cy});
  }
  const double avail_w = canvas.width - 2.0 * canvas.margin;
  const double avail_h = canvas.height - 2.0 * canvas.margin;
  double scale = std::numeric_limits<double>::infinity();
  if (w > 0.0) scale = std::min(scale, avail_w / w);
  if (h > 0.0) scale = std::min(scale, avail_h / h);
  const double mx = 0.5 * (x0 + x1), my = 0.5 * (y0 + y1);
  Layout out(l.size());
  for (std::size_t i = 0; i < l.size(); ++i) {
    out[i] = {cx + (l[i].x - mx) * scale, cy + (l[i].y - my) * scale};
  }
  return out;
}

// Node r*cols + c sits at lattice point (c, r), mapped onto the canvas.
inline Layout layout_grid_perfect(int rows, int cols, const Canvas& canvas = {}) {
  if (rows < 1 || cols < 1) detail::fail("grid layout needs positive dimensions");
  Layout raw;
  raw.reserve(std::size_t(rows * cols));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) raw.push_back({double(c), double(r)});
  }
  return normalize_to_canvas(raw, canvas);
}

// Node 0 at the canvas center, leaf i (1-based) at angle 2*pi*(i-1)/leaves.
inline Layout layout_star_perfect(int leaves, const Canvas& canvas = {}) {
  if (leaves < 1) detail::fail("star layout needs at least one leaf");
  const double cx = 0.5 * canvas.width, cy = 0.5 * canvas.height;
  const double radius = 0.5 * std::min(canvas.width, canvas.height) - canvas.margin;
  Layout out(std::size_t(leaves + 1), Point{cx, cy});
  for (int i = 1; i <= leaves; ++i) {
    const double a = 2.0 * std::numbers::pi * double(i - 1) / double(leaves);
    out[i] = {cx + radius * std::cos(a), cy + radius * std::sin(a)};
  }
  return out;
}

// Unweighted single-source shortest path lengths.
inline std::vector<int> bfs_distances(const Graph& g, int source) {
  std::vector<int> dist(g.size(), -1);
  std::vector<int> queue{source};
  dist[source] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const int v = queue[head];
    for (int w : g.neighbors(v)) {
      if (dist[w] < 0) {
        dist[w] = dist[v] + 1;
        queue.push_back(w);
      }
    }
  }
  return dist;
}

struct PmdsConfig {
  int pivots = 12;  // capped at n
  int power_iterations = 100;
};

// Max-min pivot sweep seeded at the lowest-index node of highest degree.
// Returns pivots and their distance rows.
inline std::vector<int> select_pivots(const Graph& g, int count, std::vector<std::vector<int>>* rows = nullptr) {
  const int n = int(g.size());
  count = std::min(count, n);
  int first = 0;
  for (int v = 1; v < n; ++v) {
    if (g.degree(v) > g.degree(first)) first = v;
  }
  std::vector<int> pivots{first};
  std::vector<std::vector<int>> dist{bfs_distances(g, first)};
  std::vector<int> closest = dist.back();
  while (int(pivots.size()) < count) {
    int next = -1;
    for (int v = 0; v < n; ++v) {
      if (std::find(pivots.begin(), pivots.end(), v) != pivots.end()) continue;
      if (next < 0 || closest[v] > closest[next]) next = v;
    }
    pivots.push_back(next);
    dist.push_back(bfs_distances(g, next));
    for (int v = 0; v < n; ++v) closest[v] = std::min(closest[v], dist.back()[v]);
  }
  if (rows != nullptr) *rows = std::move(dist);
  return pivots;
}

// Pivot MDS: double-centered squared pivot distances projected onto their
// top two singular directions. Bitwise deterministic for identical input.
inline Layout layout_pivotmds(const Graph& g, const PmdsConfig& cfg = {}, const Canvas& canvas = {},
                              Diagnostics* diag = nullptr) {
  const int n = int(g.size());
  if (n == 0) return {};
  if (!is_connected(g)) detail::fail("pivotmds needs a connected graph");
  if (n == 1) return {Point{0.5 * canvas.width, 0.5 * canvas.height}};
  if (cfg.pivots < 2) detail::fail("pivotmds needs at least two pivots");

  std::vector<std::vector<int>> rows;
  select_pivots(g, cfg.pivots, &rows);
  const int p = int(rows.size());

  // B is n x p, row-major
  std::vector<double> b(std::size_t(n) * p);
  std::vector<double> row_mean(n, 0.0), col_mean(p, 0.0);
  double grand = 0.0;
  for (int j = 0; j < p; ++j) {
    for (int i = 0; i < n; ++i) {
      const double d2 = double(rows[j][i]) * double(rows[j][i]);
      b[std::size_t(i) * p + j] = d2;
      row_mean[i] += d2 / p;
      col_mean[j] += d2 / n;
      grand += d2 / (double(n) * p);
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      auto& v = b[std::size_t(i) * p + j];
      v = -0.5 * (v - row_mean[i] - col_mean[j] + grand);
    }
  }
  // S = B^T B (p x p)
  std::vector<double> s(std::size_t(p) * p, 0.0);
  for (int a = 0; a < p; ++a) {
    for (int c = a; c < p; ++c) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += b[std::size_t(i) * p + a] * b[std::size_t(i) * p + c];
      s[std::size_t(a) * p + c] = s[std::size_t(c) * p + a] = acc;
    }
  }

  // Two-vector subspace iteration from the fixed basis vectors e0, e1.
  std::vector<double> v0(p, 0.0), v1(p, 0.0), w(p);
  v0[0] = 1.0;
  v1[1] = 1.0;
  auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
    for (int a = 0; a < p; ++a) {
      double acc = 0.0;
      for (int c = 0; c < p; ++c) acc += s[std::size_t(a) * p + c] * x[c];
      y[a] = acc;
    }
  };
  auto dot = [p](const std::vector<double>& x, const std::vector<double>& y) {
    double acc = 0.0;
    for (int a = 0; a < p; ++a) acc += x[a] * y[a];
    return acc;
  };
  auto normalize = [&](std::vector<double>& x) {
    const double len = std::sqrt(dot(x, x));
    if (len > 0.0) {
      for (auto& e : x) e /= len;
    }
    return len;
  };
  for (int it = 0; it < cfg.power_iterations; ++it) {
    apply(v0, w);
    v0 = w;
    apply(v1, w);
    v1 = w;
    normalize(v0);
    const double proj = dot(v0, v1);
    for (int a = 0; a < p; ++a) v1[a] -= proj * v0[a];
    normalize(v1);
  }
  // Rayleigh-Ritz on span{v0, v1} so the two directions come out ordered.
  std::vector<double> sv0(p), sv1(p);
  apply(v0, sv0);
  apply(v1, sv1);
  const double h00 = dot(v0, sv0), h01 = dot(v0, sv1), h11 = dot(v1, sv1);
  const double tr = h00 + h11, det = h00 * h11 - h01 * h01;
  const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
  const double lam0 = 0.5 * tr + disc, lam1 = 0.5 * tr - disc;
  std::vector<double> dir0(p), dir1(p);
  double c0, s0;
  if (std::abs(h01) > 1e-300) {
    c0 = h01;
    s0 = lam0 - h00;
  } else if (h00 >= h11) {
    c0 = 1.0;
    s0 = 0.0;
  } else {
    c0 = 0.0;
    s0 = 1.0;
  }
  const double len = std::hypot(c0, s0);
  c0 /= len;
  s0 /= len;
  for (int a = 0; a < p; ++a) {
    dir0[a] = c0 * v0[a] + s0 * v1[a];
    dir1[a] = -s0 * v0[a] + c0 * v1[a];
  }

  Layout raw(n);
  const bool flat = !(lam0 > 0.0) || lam1 <= 1e-12 * lam0;
  if (!(lam0 > 0.0)) detail::fail("pivotmds: distance matrix has rank 0");
  if (flat) detail::note(diag, "pivotmds: rank-1 embedding, second axis set to zero");
  for (int i = 0; i < n; ++i) {
    double x = 0.0, y = 0.0;
    for (int a = 0; a < p; ++a) {
      x += b[std::size_t(i) * p + a] * dir0[a];
      y += b[std::size_t(i) * p + a] * dir1[a];
    }
    raw[i] = {x, flat ? 0.0 : y};
  }
  return normalize_to_canvas(raw, canvas, diag);
}

struct Fa2Config {
  int iterations = 700;
  double scaling = 2.0;            // repulsion coefficient k_r
  double gravity = 1.0;            // k_g, pulls toward the initial centroid
  double jitter_tolerance = 1.0;   // global speed vs. swinging trade-off
  double max_speed_rise = 0.5;     // adjust-speed tolerance: per-step relative speed increase cap
};

// ForceAtlas2 without LinLog, overlap prevention or Barnes-Hut. Mass of a node
// is degree + 1. `trace`, if set, receives the mean node displacement of each step.
inline Layout layout_forceatlas2(const Graph& g, const Layout& init, const Fa2Config& cfg = {},
                                 std::vector<double>* trace = nullptr, Diagnostics* diag = nullptr) {
  const std::size_t n = g.size();
  if (init.size() != n) detail::fail("forceatlas2: init has ", init.size(), " positions for ", n, " nodes");
  if (cfg.iterations < 0) detail::fail("forceatlas2: negative iteration count");
  if (!(cfg.scaling > 0.0)) detail::fail("forceatlas2: scaling must be positive");
  for (const auto& p : init) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) detail::fail("forceatlas2: non-finite initial position");
  }
  constexpr double kTiny = 1e-9;

  // index-based unit direction used to separate coincident points
  auto nudge = [](std::size_t i) {
    const double a = 2.399963229728653 * double(i + 1);  // golden angle
    return Point{std::cos(a), std::sin(a)};
  };

  Layout pos = init;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (pos[i] == pos[j]) {
        const auto d = nudge(i);
        pos[i].x += 1e-6 * d.x;
        pos[i].y += 1e-6 * d.y;
        detail::note(diag, "forceatlas2: perturbed coincident initial position of node " + std::to_string(i));
        break;
      }
    }
  }
  if (cfg.iterations == 0) return init;

  // gravity pulls toward the centroid of the initial layout, held fixed so the
  // drawing cannot drift as a whole
  double cx = 0.0, cy = 0.0;
  for (const auto& p : pos) {
    cx += p.x / double(n);
    cy += p.y / double(n);
  }

  std::vector<double> mass(n);
  for (std::size_t v = 0; v < n; ++v) mass[v] = g.degree(int(v)) + 1.0;

  std::vector<Point> force(n), old_force(n);  // old_force starts at zero, damping the first step
  double speed = 1.0, speed_efficiency = 1.0;
  bool coincident_reported = false;

  for (int step = 0; step < cfg.iterations; ++step) {
    old_force.swap(force);
    std::fill(force.begin(), force.end(), Point{});


    // repulsion: k_r * m_u * m_v / d along the separating direction
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        double dx = pos[i].x - pos[j].x, dy = pos[i].y - pos[j].y;
        double d2 = dx * dx + dy * dy;
        if (d2 < kTiny * kTiny) {
          const auto d = nudge(i);
          dx = kTiny * d.x;
          dy = kTiny * d.y;
          d2 = kTiny * kTiny;
          if (!coincident_reported) {
            detail::note(diag, "forceatlas2: coincident nodes separated by index-based displacement");
            coincident_reported = true;
          }
        }
        const double f = cfg.scaling * mass[i] * mass[j] / d2;
        force[i].x += dx * f;
        force[i].y += dy * f;
        force[j].x -= dx * f;
        force[j].y -= dy * f;
      }
    }
    // gravity: constant magnitude k_g * m toward (cx, cy)
    for (std::size_t i = 0; i < n; ++i) {
      const double dx = pos[i].x - cx, dy = pos[i].y - cy;
      const double d = std::sqrt(dx * dx + dy * dy);
      if (d > 0.0) {
        const double f = cfg.gravity * mass[i] / d;
        force[i].x -= dx * f;
        force[i].y -= dy * f;
      }
    }
    // linear attraction along edges
    for (auto [u, v] : g.edges()) {
      const double dx = pos[u].x - pos[v].x, dy = pos[u].y - pos[v].y;
      force[u].x -= dx;
      force[u].y -= dy;
      force[v].x += dx;
      force[v].y += dy;
    }


    // adaptive global speed
    double swinging = 0.0, traction = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sx = old_force[i].x - force[i].x, sy = old_force[i].y - force[i].y;
      const double tx = old_force[i].x + force[i].x, ty = old_force[i].y + force[i].y;
      swinging += mass[i] * std::sqrt(sx * sx + sy * sy);
      traction += 0.5 * mass[i] * std::sqrt(tx * tx + ty * ty);
    }
    const double opt_jitter = 0.05 * std::sqrt(double(n));
    const double min_jitter = std::sqrt(opt_jitter);
    constexpr double kMaxJitter = 10.0;
    constexpr double kMinEfficiency = 0.05;
    double jitter = cfg.jitter_tolerance *
                    std::max(min_jitter, std::min(kMaxJitter, opt_jitter * traction / (double(n) * double(n))));
    if (traction > 0.0 && swinging / traction > 2.0) {
      if (speed_efficiency > kMinEfficiency) speed_efficiency *= 0.5;
      jitter = std::max(jitter, cfg.jitter_tolerance);
    }
    const double target = swinging > 0.0 ? jitter * speed_efficiency * traction / swinging
                                         : std::numeric_limits<double>::infinity();
    if (swinging > jitter * traction) {
      if (speed_efficiency > kMinEfficiency) speed_efficiency *= 0.7;
    } else if (speed < 1000.0) {
      speed_efficiency *= 1.3;
    }
    speed += std::min(target - speed, cfg.max_speed_rise * speed);

    // per-node displacement damped by local swinging
    double moved = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sx = old_force[i].x - force[i].x, sy = old_force[i].y - force[i].y;
      const double node_swing = mass[i] * std::sqrt(sx * sx + sy * sy);
      const double factor = speed / (1.0 + std::sqrt(speed * node_swing));
      const double mx = force[i].x * factor, my = force[i].y * factor;
      pos[i].x += mx;
      pos[i].y += my;
      moved += std::sqrt(mx * mx + my * my);
    }
    if (trace != nullptr) trace->push_back(moved / double(n));
  }
  return pos;
}

// Ground-truth drawing used for "forceatlas2" datasets: PivotMDS start,
// ForceAtlas2 refinement, canvas normalization.
inline Layout layout_forceatlas2_pivot_init(const Graph& g, const Fa2Config& fa2 = {}, const PmdsConfig& pmds = {},
                                            const Canvas& canvas = {}, Diagnostics* diag = nullptr) {
  auto init = layout_pivotmds(g, pmds, canvas, diag);
  return normalize_to_canvas(layout_forceatlas2(g, init, fa2, nullptr, diag), canvas, diag);
}

}  // namespace gdraw
