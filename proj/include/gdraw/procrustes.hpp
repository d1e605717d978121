#pragma once

// Procrustes Statistic between two drawings of the same graph and the
// similarity transform that aligns them. Both inputs are centered first, so
// the statistic is invariant to translation, rotation, reflection and scale.
//
// With A = Cbar_c^T C_c (2x2), M = C^T Cbar Cbar^T C = A^T A and
//   tr(M^{1/2}) = sqrt(tr M + 2 sqrt(det M)) = sqrt(|A|_F^2 + 2 |det A|),
// so R^2 = 1 - (|A|_F^2 + 2 |det A|) / (tr(C_c^T C_c) tr(Cbar_c^T Cbar_c)).

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "gdraw/autodiff.hpp"
#include "gdraw/error.hpp"
#include "gdraw/graph.hpp"

namespace gdraw {

inline constexpr double kDegenerateTrace = 1e-9;
// Normalized det(M) below which the backward pass smooths |det A|.
inline constexpr double kBranchEpsilon = 1e-12;

// Column-mean-free copy of an n x 2 row-major coordinate array.
template <typename T>
std::vector<T> center(std::span<const T> coords) {
  if (coords.size() % 2 != 0) detail::fail("coordinate array must hold (x, y) pairs");
  const std::size_t n = coords.size() / 2;
  std::vector<T> out(coords.begin(), coords.end());
  if (n == 0) return out;
  T mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += coords[2 * i];
    my += coords[2 * i + 1];
  }
  mx /= T(n);
  my /= T(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[2 * i] -= mx;
    out[2 * i + 1] -= my;
  }
  return out;
}

inline std::vector<double> flatten(const Layout& l) {
  std::vector<double> out;
  out.reserve(2 * l.size());
  for (const auto& p : l) {
    out.push_back(p.x);
    out.push_back(p.y);
  }
  return out;
}

inline Layout unflatten(std::span<const double> coords) {
  Layout out(coords.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {coords[2 * i], coords[2 * i + 1]};
  return out;
}

inline Layout center(const Layout& l) {
  auto flat = flatten(l);
  return unflatten(center<double>(flat));
}

namespace detail {

template <typename T>
struct ProcrustesTerms {
  std::vector<T> c, b;       // centered inputs
  T a11 = 0, a12 = 0, a21 = 0, a22 = 0;  // A = b^T c
  T p = 0, q = 0;            // tr(c^T c), tr(b^T b)
  T raw = 0;                 // unclamped statistic
};

template <typename T>
ProcrustesTerms<T> procrustes_terms(std::span<const T> c, std::span<const T> cbar) {
  if (c.size() != cbar.size()) detail::fail("procrustes: drawings have different node counts");
  if (c.size() < 4) detail::fail("procrustes: need at least two nodes");
  ProcrustesTerms<T> t;
  t.c = center(c);
  t.b = center(cbar);
  const std::size_t n = c.size() / 2;
  for (std::size_t i = 0; i < n; ++i) {
    const T cx = t.c[2 * i], cy = t.c[2 * i + 1], bx = t.b[2 * i], by = t.b[2 * i + 1];
    t.p += cx * cx + cy * cy;
    t.q += bx * bx + by * by;
    t.a11 += bx * cx;
    t.a12 += bx * cy;
    t.a21 += by * cx;
    t.a22 += by * cy;
  }
  if (!(t.p > T(kDegenerateTrace)) || !(t.q > T(kDegenerateTrace))) detail::fail("degenerate layout");
  const T det = t.a11 * t.a22 - t.a12 * t.a21;
  const T frob = t.a11 * t.a11 + t.a12 * t.a12 + t.a21 * t.a21 + t.a22 * t.a22;
  t.raw = T(1) - (frob + T(2) * std::abs(det)) / (t.p * t.q);
  return t;
}

}  // namespace detail

// R^2 in [0, 1]; 0 means identical shapes.
template <typename T>
T procrustes_statistic(std::span<const T> c, std::span<const T> cbar) {
  return std::clamp(detail::procrustes_terms(c, cbar).raw, T(0), T(1));
}

inline double procrustes_statistic(const Layout& c, const Layout& cbar) {
  const auto a = flatten(c), b = flatten(cbar);
  return procrustes_statistic<double>(a, b);
}

// Gradient of R^2 with respect to c, scaled by `upstream`. Sets *smoothed when
// det(M) sat at the |det A| branch point and the derivative was regularized.
template <typename T>
std::vector<T> procrustes_backward(std::span<const T> c, std::span<const T> cbar, T upstream = T(1),
                                   bool* smoothed = nullptr) {
  const auto t = detail::procrustes_terms(c, cbar);
  const std::size_t n = c.size() / 2;
  const T pq = t.p * t.q;
  const T det = t.a11 * t.a22 - t.a12 * t.a21;
  const T frob = t.a11 * t.a11 + t.a12 * t.a12 + t.a21 * t.a21 + t.a22 * t.a22;
  const T s = frob + T(2) * std::abs(det);

  const T det_norm = det / pq;
  T sgn;
  if (det_norm * det_norm < T(kBranchEpsilon)) {
    sgn = det_norm / std::sqrt(det_norm * det_norm + T(kBranchEpsilon));
    if (smoothed != nullptr) *smoothed = true;
  } else {
    sgn = det > 0 ? T(1) : T(-1);
    if (smoothed != nullptr) *smoothed = false;
  }
  // dS/dA = 2A + 2 sgn(det) cof(A)
  const T g11 = T(2) * (t.a11 + sgn * t.a22);
  const T g12 = T(2) * (t.a12 - sgn * t.a21);
  const T g21 = T(2) * (t.a21 - sgn * t.a12);
  const T g22 = T(2) * (t.a22 + sgn * t.a11);

  std::vector<T> grad(c.size());
  const T inv_pq = T(1) / pq;
  const T cscale = T(2) * s / (t.p * pq);
  for (std::size_t i = 0; i < n; ++i) {
    const T bx = t.b[2 * i], by = t.b[2 * i + 1];
    // dS/dc_i = b_i^T G (row vector)
    const T dsx = bx * g11 + by * g21;
    const T dsy = bx * g12 + by * g22;
    grad[2 * i] = upstream * (-dsx * inv_pq + cscale * t.c[2 * i]);
    grad[2 * i + 1] = upstream * (-dsy * inv_pq + cscale * t.c[2 * i + 1]);
  }
  // project through the centering map
  return center<T>(grad);
}

// Differentiable loss node on a tape: `coords` is an (n x 2) or 2n-vector
// variable; `target` is a constant drawing.
template <typename T>
ad::Var procrustes_loss(ad::Tape<T>& tape, ad::Var coords, std::span<const T> target) {
  auto value = tape.value(coords);
  std::vector<T> c(value.begin(), value.end());
  std::vector<T> cbar(target.begin(), target.end());
  const T r2 = procrustes_statistic<T>(c, cbar);
  const ad::Var inputs[] = {coords};
  return tape.custom(inputs, {1, 1}, {r2},
                     [c = std::move(c), cbar = std::move(cbar)](std::span<const T> gout, std::span<T* const> gin) {
                       if (gin[0] == nullptr) return;
                       const auto g = procrustes_backward<T>(c, cbar, gout[0]);
                       for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
                     });
}

// Optimal similarity transform x -> scale * rotation * x + translation taking
// c onto cbar in the least-squares sense. Rotation may include a reflection.
struct Alignment {
  std::array<double, 4> rotation{1, 0, 0, 1};  // row-major 2x2
  double scale = 1.0;
  Point translation;
  Layout aligned;
  double residual = 0.0;  // sum of squared distances after alignment
  bool reflection = false;
};

inline Alignment procrustes_align(const Layout& c, const Layout& cbar) {
  const auto fc = flatten(c), fb = flatten(cbar);
  const auto t = detail::procrustes_terms<double>(fc, fb);
  // K = sum b_i c_i^T = A
  Eigen::Matrix2d k;
  k << t.a11, t.a12, t.a21, t.a22;
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(k, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix2d rot = svd.matrixU() * svd.matrixV().transpose();
  const double trace_sigma = svd.singularValues().sum();

  Alignment out;
  out.rotation = {rot(0, 0), rot(0, 1), rot(1, 0), rot(1, 1)};
  out.reflection = rot.determinant() < 0.0;
  out.scale = trace_sigma / t.p;
  const std::size_t n = c.size();
  Point mc, mb;
  for (std::size_t i = 0; i < n; ++i) {
    mc.x += c[i].x / double(n);
    mc.y += c[i].y / double(n);
    mb.x += cbar[i].x / double(n);
    mb.y += cbar[i].y / double(n);
  }
  out.translation = {mb.x - out.scale * (rot(0, 0) * mc.x + rot(0, 1) * mc.y),
                     mb.y - out.scale * (rot(1, 0) * mc.x + rot(1, 1) * mc.y)};
  out.aligned.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = c[i].x, y = c[i].y;
    out.aligned[i] = {out.scale * (rot(0, 0) * x + rot(0, 1) * y) + out.translation.x,
                      out.scale * (rot(1, 0) * x + rot(1, 1) * y) + out.translation.y};
    const double dx = out.aligned[i].x - cbar[i].x, dy = out.aligned[i].y - cbar[i].y;
    out.residual += dx * dx + dy * dy;
  }
  return out;
}

}  // namespace gdraw
