#pragma once

// Reverse-mode differentiation over dense vectors and row-major matrices.
// A Tape records primitives in evaluation order; backward() replays them in
// exact reverse order. Parameters are borrowed (value and gradient buffers
// live outside the tape) so a tape per example costs no parameter copies.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gdraw/error.hpp"

namespace gdraw::ad {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 1;

  std::size_t size() const { return rows * cols; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(Shape s) {
  return "(" + std::to_string(s.rows) + "x" + std::to_string(s.cols) + ")";
}

template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape(s), data(s.size(), fill) {}
  Tensor(Shape s, std::vector<T> values) : shape(s), data(std::move(values)) {
    if (data.size() != shape.size()) detail::fail("tensor of shape ", to_string(shape), " given ", data.size(), " values");
  }
  std::size_t size() const { return data.size(); }
};

struct Var {
  int id = -1;
};

template <typename T>
class Tape {
 public:
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using VecMap = Eigen::Map<Vec>;
  using CVecMap = Eigen::Map<const Vec>;
  using MatMap = Eigen::Map<MatR>;
  using CMatMap = Eigen::Map<const MatR>;

  // Custom backward: receives the output gradient and one gradient buffer per
  // input (nullptr where the input needs no gradient).
  using CustomBackward = std::function<void(std::span<const T> grad_out, std::span<T* const> grad_in)>;

  Tape() { nodes_.reserve(1024); }

  // ---- leaves ----------------------------------------------------------------

  Var constant(Shape s, std::span<const T> values) {
    check_count(s, values.size());
    Node& nd = push(Op::leaf, s, false);
    nd.value.assign(values.begin(), values.end());
    return last();
  }

  Var constant(const Tensor<T>& t) { return constant(t.shape, t.data); }

  // Differentiable leaf owned by the tape; read its gradient with grad().
  Var variable(Shape s, std::span<const T> values) {
    check_count(s, values.size());
    Node& nd = push(Op::leaf, s, true);
    nd.value.assign(values.begin(), values.end());
    return last();
  }

  // Borrowed parameter. `grad` may be null for inference-only tapes; otherwise
  // backward() accumulates into it.
  Var parameter(Shape s, const T* value, T* grad) {
    Node& nd = push(Op::leaf, s, grad != nullptr);
    nd.borrowed = value;
    nd.external_grad = grad;
    return last();
  }

  // ---- primitives --------------------------------------------------------------

  // y = W x, W row-major (r x c), x of length c.
  Var matvec(Var w, Var x) {
    const Shape sw = shape(w), sx = shape(x);
    if (sx.size() != sw.cols) shape_error("matvec", sw, sx);
    Node& nd = push(Op::matvec, {sw.rows, 1}, needs(w) || needs(x), {w.id, x.id});
    VecMap(nd.value.data(), Eigen::Index(sw.rows)).noalias() = cmat(w) * cvec(x);
    return last();
  }

  // Y = A B for row-major matrices.
  Var matmul(Var a, Var b) {
    const Shape sa = shape(a), sb = shape(b);
    if (sa.cols != sb.rows) shape_error("matmul", sa, sb);
    Node& nd = push(Op::matmul, {sa.rows, sb.cols}, needs(a) || needs(b), {a.id, b.id});
    MatMap(nd.value.data(), Eigen::Index(sa.rows), Eigen::Index(sb.cols)).noalias() = cmat(a) * cmat(b);
    return last();
  }

  Var add(Var a, Var b) {
    same_shape("add", a, b);
    Node& nd = push(Op::add, shape(a), needs(a) || needs(b), {a.id, b.id});
    vec(nd) = cvec(a) + cvec(b);
    return last();
  }

  // Sum of any number of equally shaped inputs.
  Var add_n(std::span<const Var> xs) {
    if (xs.empty()) detail::fail("add_n needs at least one input");
    if (xs.size() == 1) return xs[0];
    bool ng = false;
    std::vector<int> ids;
    for (Var v : xs) {
      same_shape("add_n", xs[0], v);
      ng = ng || needs(v);
      ids.push_back(v.id);
    }
    Node& nd = push(Op::add_n, shape(xs[0]), ng, std::move(ids));
    auto out = vec(nd);
    out = cvec(xs[0]);
    for (std::size_t i = 1; i < xs.size(); ++i) out += cvec(xs[i]);
    return last();
  }

  Var hadamard(Var a, Var b) {
    same_shape("hadamard", a, b);
    Node& nd = push(Op::hadamard, shape(a), needs(a) || needs(b), {a.id, b.id});
    vec(nd) = cvec(a).cwiseProduct(cvec(b));
    return last();
  }

  Var sigmoid(Var a) {
    Node& nd = push(Op::sigmoid, shape(a), needs(a), {a.id});
    const T* in = value_ptr(a);
    for (std::size_t i = 0; i < nd.value.size(); ++i) nd.value[i] = T(1) / (T(1) + std::exp(-in[i]));
    return last();
  }

  Var tanh(Var a) {
    Node& nd = push(Op::tanh, shape(a), needs(a), {a.id});
    const T* in = value_ptr(a);
    for (std::size_t i = 0; i < nd.value.size(); ++i) nd.value[i] = std::tanh(in[i]);
    return last();
  }

  // Row-wise concatenation; vectors concatenate end to end.
  Var concat(std::span<const Var> xs) {
    if (xs.empty()) detail::fail("concat needs at least one input");
    const std::size_t cols = shape(xs[0]).cols;
    std::size_t rows = 0;
    bool ng = false;
    std::vector<int> ids;
    for (Var v : xs) {
      if (shape(v).cols != cols) shape_error("concat", shape(xs[0]), shape(v));
      rows += shape(v).rows;
      ng = ng || needs(v);
      ids.push_back(v.id);
    }
    Node& nd = push(Op::concat, {rows, cols}, ng, std::move(ids));
    T* out = nd.value.data();
    for (Var v : xs) {
      const T* in = value_ptr(v);
      out = std::copy(in, in + shape(v).size(), out);
    }
    return last();
  }

  // Contiguous segment [offset, offset + len) of a vector.
  Var slice(Var a, std::size_t offset, std::size_t len) {
    if (offset + len > shape(a).size()) {
      detail::fail("slice [", offset, ", ", offset + len, ") out of range for shape ", to_string(shape(a)));
    }
    Node& nd = push(Op::slice, {len, 1}, needs(a), {a.id});
    nd.aux = offset;
    const T* in = value_ptr(a) + offset;
    std::copy(in, in + len, nd.value.begin());
    return last();
  }

  // Scalar sum of all entries.
  Var sum(Var a) {
    Node& nd = push(Op::sum, {1, 1}, needs(a), {a.id});
    nd.value[0] = cvec(a).sum();
    return last();
  }

  Var scale(Var a, T factor) {
    Node& nd = push(Op::scale, shape(a), needs(a), {a.id});
    nd.scalar = factor;
    vec(nd) = cvec(a) * factor;
    return last();
  }

  // Escape hatch for fused operations with hand-written backward rules.
  Var custom(std::span<const Var> inputs, Shape out_shape, std::vector<T> out_value, CustomBackward backward) {
    check_count(out_shape, out_value.size());
    bool ng = false;
    std::vector<int> ids;
    for (Var v : inputs) {
      ng = ng || needs(v);
      ids.push_back(v.id);
    }
    Node& nd = push(Op::custom, out_shape, ng, std::move(ids));
    nd.value = std::move(out_value);
    nd.custom = std::move(backward);
    return last();
  }

  // ---- access --------------------------------------------------------------------

  Shape shape(Var v) const { return nodes_.at(v.id).shape; }
  std::span<const T> value(Var v) const { return {value_ptr(v), shape(v).size()}; }
  T scalar(Var v) const { return value_ptr(v)[0]; }
  std::span<const T> grad(Var v) const { return nodes_.at(v.id).grad; }
  std::size_t size() const { return nodes_.size(); }

  // Reverse sweep from a scalar output, seeded with `seed`.
  void backward(Var out, T seed = T(1)) {
    if (shape(out).size() != 1) detail::fail("backward needs a scalar output, got ", to_string(shape(out)));
    for (auto& nd : nodes_) nd.grad.clear();
    Node& root = nodes_[out.id];
    if (!root.requires_grad) return;
    root.grad.assign(1, seed);
    for (int id = out.id; id >= 0; --id) {
      Node& nd = nodes_[id];
      if (!nd.requires_grad || nd.grad.empty()) continue;
      propagate(nd);
      if (nd.external_grad != nullptr) {
        VecMap(nd.external_grad, Eigen::Index(nd.grad.size())) += CVecMap(nd.grad.data(), Eigen::Index(nd.grad.size()));
      }
    }
  }

  // Order in which backward() visits node ids (for audits of the sweep).
  std::vector<int> reverse_order(Var out) const {
    std::vector<int> ids;
    for (int id = out.id; id >= 0; --id) ids.push_back(id);
    return ids;
  }

 private:
  enum class Op { leaf, matvec, matmul, add, add_n, hadamard, sigmoid, tanh, concat, slice, sum, scale, custom };

  struct Node {
    Op op = Op::leaf;
    Shape shape;
    bool requires_grad = false;
    std::vector<int> inputs;
    std::vector<T> value;
    const T* borrowed = nullptr;
    T* external_grad = nullptr;
    std::vector<T> grad;
    std::size_t aux = 0;
    T scalar = T(0);
    CustomBackward custom;
  };

  std::vector<Node> nodes_;

  Node& push(Op op, Shape s, bool requires_grad, std::vector<int> inputs = {}) {
    Node& nd = nodes_.emplace_back();
    nd.op = op;
    nd.shape = s;
    nd.requires_grad = requires_grad;
    nd.inputs = std::move(inputs);
    if (op != Op::leaf && op != Op::custom) nd.value.resize(s.size());
    return nd;
  }

  Var last() const { return Var{int(nodes_.size()) - 1}; }
  bool needs(Var v) const { return nodes_.at(v.id).requires_grad; }

  const T* value_ptr(Var v) const { return value_ptr(nodes_.at(v.id)); }
  static const T* value_ptr(const Node& nd) { return nd.borrowed != nullptr ? nd.borrowed : nd.value.data(); }

  CVecMap cvec(Var v) const { return CVecMap(value_ptr(v), Eigen::Index(shape(v).size())); }
  CMatMap cmat(Var v) const {
    const Shape s = shape(v);
    return CMatMap(value_ptr(v), Eigen::Index(s.rows), Eigen::Index(s.cols));
  }
  static VecMap vec(Node& nd) { return VecMap(nd.value.data(), Eigen::Index(nd.value.size())); }

  // Gradient buffer of an input, allocated on first use; null if not needed.
  T* grad_of(int id) {
    Node& nd = nodes_[id];
    if (!nd.requires_grad) return nullptr;
    if (nd.grad.empty()) nd.grad.assign(nd.shape.size(), T(0));
    return nd.grad.data();
  }

  void propagate(Node& nd) {
    const std::size_t len = nd.shape.size();
    const CVecMap g(nd.grad.data(), Eigen::Index(len));
    const auto& in = nd.inputs;
    switch (nd.op) {
      case Op::leaf:
        break;
      case Op::matvec: {
        const Shape sw = nodes_[in[0]].shape;
        const CMatMap w(value_ptr(nodes_[in[0]]), Eigen::Index(sw.rows), Eigen::Index(sw.cols));
        const CVecMap x(value_ptr(nodes_[in[1]]), Eigen::Index(sw.cols));
        if (T* gw = grad_of(in[0])) MatMap(gw, Eigen::Index(sw.rows), Eigen::Index(sw.cols)).noalias() += g * x.transpose();
        if (T* gx = grad_of(in[1])) VecMap(gx, Eigen::Index(sw.cols)).noalias() += w.transpose() * g;
        break;
      }
      case Op::matmul: {
        const Shape sa = nodes_[in[0]].shape, sb = nodes_[in[1]].shape;
        const CMatMap a(value_ptr(nodes_[in[0]]), Eigen::Index(sa.rows), Eigen::Index(sa.cols));
        const CMatMap b(value_ptr(nodes_[in[1]]), Eigen::Index(sb.rows), Eigen::Index(sb.cols));
        const CMatMap gm(nd.grad.data(), Eigen::Index(nd.shape.rows), Eigen::Index(nd.shape.cols));
        if (T* ga = grad_of(in[0])) MatMap(ga, Eigen::Index(sa.rows), Eigen::Index(sa.cols)).noalias() += gm * b.transpose();
        if (T* gb = grad_of(in[1])) MatMap(gb, Eigen::Index(sb.rows), Eigen::Index(sb.cols)).noalias() += a.transpose() * gm;
        break;
      }
      case Op::add:
      case Op::add_n:
        for (int id : in) {
          if (T* gi = grad_of(id)) VecMap(gi, Eigen::Index(len)) += g;
        }
        break;
      case Op::hadamard: {
        const CVecMap a(value_ptr(nodes_[in[0]]), Eigen::Index(len));
        const CVecMap b(value_ptr(nodes_[in[1]]), Eigen::Index(len));
        if (T* ga = grad_of(in[0])) VecMap(ga, Eigen::Index(len)) += g.cwiseProduct(b);
        if (T* gb = grad_of(in[1])) VecMap(gb, Eigen::Index(len)) += g.cwiseProduct(a);
        break;
      }
      case Op::sigmoid:
        if (T* gi = grad_of(in[0])) {
          for (std::size_t i = 0; i < len; ++i) gi[i] += nd.grad[i] * nd.value[i] * (T(1) - nd.value[i]);
        }
        break;
      case Op::tanh:
        if (T* gi = grad_of(in[0])) {
          for (std::size_t i = 0; i < len; ++i) gi[i] += nd.grad[i] * (T(1) - nd.value[i] * nd.value[i]);
        }
        break;
      case Op::concat: {
        std::size_t offset = 0;
        for (int id : in) {
          const std::size_t part = nodes_[id].shape.size();
          if (T* gi = grad_of(id)) VecMap(gi, Eigen::Index(part)) += g.segment(Eigen::Index(offset), Eigen::Index(part));
          offset += part;
        }
        break;
      }
      case Op::slice:
        if (T* gi = grad_of(in[0])) VecMap(gi + nd.aux, Eigen::Index(len)) += g;
        break;
      case Op::sum:
        if (T* gi = grad_of(in[0])) VecMap(gi, Eigen::Index(nodes_[in[0]].shape.size())).array() += nd.grad[0];
        break;
      case Op::scale:
        if (T* gi = grad_of(in[0])) VecMap(gi, Eigen::Index(len)) += g * nd.scalar;
        break;
      case Op::custom: {
        std::vector<T*> gin;
        gin.reserve(in.size());
        for (int id : in) gin.push_back(grad_of(id));
        nd.custom(nd.grad, gin);
        break;
      }
    }
  }

  static void check_count(Shape s, std::size_t count) {
    if (s.size() != count) detail::fail("shape ", to_string(s), " given ", count, " values");
  }

  [[noreturn]] static void shape_error(const char* op, Shape a, Shape b) {
    detail::fail(op, ": incompatible shapes ", to_string(a), " and ", to_string(b));
  }

  void same_shape(const char* op, Var a, Var b) const {
    if (!(shape(a) == shape(b))) shape_error(op, shape(a), shape(b));
  }
};

// Function + reverse-mode gradient at a point. When `grad` is empty only the
// value is wanted.
using GradFn = std::function<double(std::span<const double> params, std::span<double> grad)>;

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Central differences per coordinate against the reverse-mode gradient.
// Relative error uses the denominator max(|a|, |b|, 1e-8). A non-empty
// `coords` restricts the differences to those indices.
inline GradCheck gradient_check(const GradFn& f, std::vector<double> params, double h = 1e-6,
                                std::span<const std::size_t> coords = {}) {
  if (!(h >= 1e-7 && h <= 1e-3)) detail::fail("gradient_check step ", h, " outside [1e-7, 1e-3]");
  std::vector<double> analytic(params.size(), 0.0);
  const double base = f(params, analytic);
  if (!std::isfinite(base)) detail::fail("gradient_check: function is not finite at the base point");
  GradCheck out;
  std::vector<std::size_t> all;
  if (coords.empty()) {
    all.resize(params.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    coords = all;
  }
  bool first = true;
  for (std::size_t i : coords) {
    if (i >= params.size()) detail::fail("gradient_check coordinate ", i, " out of range");
    const double saved = params[i];
    params[i] = saved + h;
    const double up = f(params, {});
    params[i] = saved - h;
    const double down = f(params, {});
    params[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) detail::fail("gradient_check: non-finite value at coordinate ", i);
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-8});
    const double rel = std::abs(numeric - analytic[i]) / denom;
    if (first || rel > out.max_rel_error) out = {rel, i, analytic[i], numeric};
    first = false;
  }
  return out;
}

}  // namespace gdraw::ad
