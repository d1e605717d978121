#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gdraw/autodiff.hpp"
#include "gdraw/error.hpp"
#include "gdraw/graph.hpp"

namespace gdraw {

enum class ModelKind { ours, baseline };

inline const char* model_name(ModelKind k) { return k == ModelKind::ours ? "ours" : "baseline"; }

inline ModelKind parse_model(const std::string& s) {
  if (s == "ours") return ModelKind::ours;
  if (s == "baseline") return ModelKind::baseline;
  detail::fail("unknown model '", s, "' (expected ours or baseline)");
}

struct ModelShape {
  ModelKind kind = ModelKind::ours;
  std::size_t hidden = 256;
  std::size_t input = 35;  // adjacency-vector size k
  std::size_t layers = 1;  // graph-LSTM is always single-layer

  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

inline ModelShape full_shape(ModelKind kind) {
  return kind == ModelKind::ours ? ModelShape{ModelKind::ours, 256, 35, 1} : ModelShape{ModelKind::baseline, 256, 35, 4};
}

template <typename T>
struct NamedTensor {
  std::string name;
  ad::Shape shape;
  std::vector<T> data;
};

// Gate blocks are stacked in the order input, output, candidate, forget.
enum Gate : std::size_t { kInput = 0, kOutput = 1, kCandidate = 2, kForget = 3 };

template <typename T>
struct ModelParams {
  ModelShape shape;
  std::vector<NamedTensor<T>> tensors;

  std::size_t count() const {
    std::size_t total = 0;
    for (const auto& t : tensors) total += t.data.size();
    return total;
  }

  const NamedTensor<T>& at(const std::string& name) const {
    for (const auto& t : tensors) {
      if (t.name == name) return t;
    }
    detail::fail("no parameter tensor named '", name, "'");
  }
  NamedTensor<T>& at(const std::string& name) {
    return const_cast<NamedTensor<T>&>(std::as_const(*this).at(name));
  }

  // Same layout, all zeros (gradient / moment buffers).
  ModelParams zeros_like() const {
    ModelParams out{shape, tensors};
    for (auto& t : out.tensors) std::fill(t.data.begin(), t.data.end(), T(0));
    return out;
  }

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    out.shape = shape;
    for (const auto& t : tensors) out.tensors.push_back({t.name, t.shape, std::vector<U>(t.data.begin(), t.data.end())});
    return out;
  }
};

inline const char* direction_name(int d) { return d == 0 ? "fwd" : "bwd"; }

// Tensor inventory (name, shape) for a model shape, in storage order.
inline std::vector<std::pair<std::string, ad::Shape>> param_layout(const ModelShape& s) {
  const std::size_t h = s.hidden, g = 4 * s.hidden;
  std::vector<std::pair<std::string, ad::Shape>> out;
  if (s.kind == ModelKind::ours) {
    for (int d = 0; d < 2; ++d) {
      const std::string p = direction_name(d);
      out.push_back({p + ".W", {g, s.input}});
      out.push_back({p + ".U", {g, h}});
      out.push_back({p + ".U_skip", {g, h}});
      out.push_back({p + ".b", {g, 1}});
    }
  } else {
    if (s.layers < 1) detail::fail("baseline needs at least one layer");
    for (std::size_t l = 0; l < s.layers; ++l) {
      const std::size_t in = l == 0 ? s.input : 2 * h;
      for (int d = 0; d < 2; ++d) {
        const std::string p = "l" + std::to_string(l + 1) + "." + direction_name(d);
        out.push_back({p + ".W_ih", {g, in}});
        out.push_back({p + ".W_hh", {g, h}});
        out.push_back({p + ".b_ih", {g, 1}});
        out.push_back({p + ".b_hh", {g, 1}});
      }
    }
  }
  out.push_back({"readout.W", {2, 2 * h}});
  out.push_back({"readout.b", {2, 1}});
  return out;
}

inline std::size_t param_count(const ModelShape& s) {
  if (s.hidden == 0) return 0;
  std::size_t total = 0;
  for (const auto& [name, shape] : param_layout(s)) total += shape.size();
  return total;
}

template <typename T>
std::size_t param_count(const ModelParams<T>& p) {
  return p.count();
}

template <typename T>
ModelParams<T> zero_params(const ModelShape& s) {
  ModelParams<T> p;
  p.shape = s;
  for (auto& [name, shape] : param_layout(s)) p.tensors.push_back({name, shape, std::vector<T>(shape.size(), T(0))});
  return p;
}

inline bool is_bias(const std::string& name) {
  return name.ends_with(".b") || name.ends_with(".b_ih") || name.ends_with(".b_hh");
}

// Glorot-uniform weights with per-gate fans; biases zero except the forget
// block, whose effective bias is 1 (b_hh forget stays 0 for the baseline).
template <typename T>
ModelParams<T> init_params(const ModelShape& s, std::uint64_t seed) {
  auto p = zero_params<T>(s);
  std::mt19937_64 rng(seed);
  const std::size_t h = s.hidden;
  for (auto& t : p.tensors) {
    if (is_bias(t.name)) {
      if (t.name == "readout.b" || t.name.ends_with(".b_hh")) continue;
      for (std::size_t i = kForget * h; i < 4 * h; ++i) t.data[i] = T(1);
      continue;
    }
    const bool readout = t.name == "readout.W";
    const double fan_out = readout ? double(t.shape.rows) : double(h);
    const double bound = std::sqrt(6.0 / (double(t.shape.cols) + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : t.data) v = T(dist(rng));
  }
  return p;
}

// Per sequence position, the positions of real-edge neighbours that are not
// the chain neighbour. `back[t]` holds k < t-1 (forward sweep), `ahead[t]`
// holds k > t+1 (backward sweep).
struct SkipLinks {
  std::vector<std::vector<int>> back;
  std::vector<std::vector<int>> ahead;
};

inline SkipLinks skip_links(const Graph& g, std::span<const int> order) {
  const std::size_t n = order.size();
  std::vector<int> pos(g.size(), -1);
  for (std::size_t i = 0; i < n; ++i) pos[order[i]] = int(i);
  SkipLinks links{std::vector<std::vector<int>>(n), std::vector<std::vector<int>>(n)};
  for (auto [u, v] : g.edges()) {
    int a = pos[u], b = pos[v];
    if (a > b) std::swap(a, b);
    if (b - a < 2) continue;
    links.back[b].push_back(a);
    links.ahead[a].push_back(b);
  }
  for (auto& l : links.back) std::sort(l.begin(), l.end());
  for (auto& l : links.ahead) std::sort(l.begin(), l.end(), std::greater<>());
  return links;
}

// Input feature rows of a sequence as a flat T array.
template <typename T>
std::vector<T> sequence_features(const NodeSequence& seq) {
  return std::vector<T>(seq.vectors.begin(), seq.vectors.end());
}

struct CellState {
  ad::Var h;
  ad::Var c;
};

template <typename T>
struct GraphLstmVars {
  ad::Var w, u, u_skip, b;
};

template <typename T>
struct LstmVars {
  ad::Var w_ih, w_hh, b_ih, b_hh;
};

// Graph-LSTM transition. Gates i, o and the candidate add sum_k U_skip h_k;
// each skip predecessor k gets its own forget gate sigma(W_f x + U_skip_f h_k + b_f)
// sharing W_f and b_f with the chain forget gate.
template <typename T>
CellState graph_lstm_cell(ad::Tape<T>& tape, ad::Var x, const std::optional<CellState>& prev,
                          std::span<const CellState> skips, const GraphLstmVars<T>& p, std::size_t hidden) {
  const std::size_t h = hidden;
  const ad::Var wx_b = tape.add(tape.matvec(p.w, x), p.b);
  ad::Var pre = prev ? tape.add(wx_b, tape.matvec(p.u, prev->h)) : wx_b;

  std::vector<ad::Var> ioc{tape.slice(pre, 0, 3 * h)};
  std::vector<ad::Var> forget_terms;
  const ad::Var wx_b_f = tape.slice(wx_b, kForget * h, h);
  for (const auto& s : skips) {
    const ad::Var z = tape.matvec(p.u_skip, s.h);
    ioc.push_back(tape.slice(z, 0, 3 * h));
    const ad::Var f = tape.sigmoid(tape.add(wx_b_f, tape.slice(z, kForget * h, h)));
    forget_terms.push_back(tape.hadamard(f, s.c));
  }
  const ad::Var gates = tape.add_n(ioc);
  const ad::Var i = tape.sigmoid(tape.slice(gates, kInput * h, h));
  const ad::Var o = tape.sigmoid(tape.slice(gates, kOutput * h, h));
  const ad::Var cand = tape.tanh(tape.slice(gates, kCandidate * h, h));

  std::vector<ad::Var> c_terms{tape.hadamard(i, cand)};
  if (prev) {
    const ad::Var f_chain = tape.sigmoid(tape.slice(pre, kForget * h, h));
    c_terms.push_back(tape.hadamard(f_chain, prev->c));
  }
  c_terms.insert(c_terms.end(), forget_terms.begin(), forget_terms.end());
  const ad::Var c = tape.add_n(c_terms);
  return {tape.hadamard(o, tape.tanh(c)), c};
}

// Textbook LSTM transition with separate input and recurrent biases.
template <typename T>
CellState standard_lstm_cell(ad::Tape<T>& tape, ad::Var x, const std::optional<CellState>& prev,
                             const LstmVars<T>& p, std::size_t hidden) {
  const std::size_t h = hidden;
  ad::Var pre = tape.add(tape.add(tape.matvec(p.w_ih, x), p.b_ih), p.b_hh);
  if (prev) pre = tape.add(pre, tape.matvec(p.w_hh, prev->h));
  const ad::Var i = tape.sigmoid(tape.slice(pre, kInput * h, h));
  const ad::Var o = tape.sigmoid(tape.slice(pre, kOutput * h, h));
  const ad::Var cand = tape.tanh(tape.slice(pre, kCandidate * h, h));
  ad::Var c = tape.hadamard(i, cand);
  if (prev) {
    const ad::Var f = tape.sigmoid(tape.slice(pre, kForget * h, h));
    c = tape.add(c, tape.hadamard(f, prev->c));
  }
  return {tape.hadamard(o, tape.tanh(c)), c};
}

// Puts every tensor of `params` on the tape. With `grads` set, backward()
// accumulates into the matching tensors of `grads`.
template <typename T>
std::vector<ad::Var> bind_params(ad::Tape<T>& tape, const ModelParams<T>& params, ModelParams<T>* grads = nullptr) {
  std::vector<ad::Var> vars;
  vars.reserve(params.tensors.size());
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    const auto& t = params.tensors[i];
    T* g = grads != nullptr ? grads->tensors[i].data.data() : nullptr;
    vars.push_back(tape.parameter(t.shape, t.data.data(), g));
  }
  return vars;
}

namespace detail {

template <typename T>
ad::Var readout(ad::Tape<T>& tape, std::span<const ad::Var> vars, const std::vector<CellState>& fwd,
                const std::vector<CellState>& bwd) {
  const ad::Var w = vars[vars.size() - 2], b = vars[vars.size() - 1];
  std::vector<ad::Var> rows;
  rows.reserve(fwd.size());
  for (std::size_t t = 0; t < fwd.size(); ++t) {
    const ad::Var both[] = {fwd[t].h, bwd[t].h};
    rows.push_back(tape.add(tape.matvec(w, tape.concat(both)), b));
  }
  return tape.concat(rows);
}

}  // namespace detail

// Forward and backward graph-LSTM sweeps, concatenated per node and mapped to
// (x, y). Returns a 2n-vector of coordinates in sequence order.
template <typename T>
ad::Var graph_lstm_forward(ad::Tape<T>& tape, const ModelShape& shape, std::span<const ad::Var> vars,
                           std::span<const T> features, const SkipLinks& links) {
  const std::size_t n = links.back.size();
  const std::size_t h = shape.hidden, k = shape.input;
  if (features.size() != n * k) detail::fail("feature array has ", features.size(), " entries, expected ", n * k);
  std::vector<ad::Var> xs;
  for (std::size_t t = 0; t < n; ++t) xs.push_back(tape.constant({k, 1}, features.subspan(t * k, k)));

  std::vector<CellState> states[2];
  for (int d = 0; d < 2; ++d) {
    const GraphLstmVars<T> p{vars[4 * d], vars[4 * d + 1], vars[4 * d + 2], vars[4 * d + 3]};
    auto& out = states[d];
    out.resize(n);
    std::vector<CellState> skips;
    for (std::size_t step = 0; step < n; ++step) {
      const std::size_t t = d == 0 ? step : n - 1 - step;
      std::optional<CellState> prev;
      if (step > 0) prev = out[d == 0 ? t - 1 : t + 1];
      skips.clear();
      for (int src : (d == 0 ? links.back[t] : links.ahead[t])) skips.push_back(out[src]);
      out[t] = graph_lstm_cell<T>(tape, xs[t], prev, skips, p, h);
    }
  }
  return detail::readout(tape, vars, states[0], states[1]);
}

// Stacked bidirectional LSTM; layer l > 1 consumes [h_fwd, h_bwd] of layer l-1.
template <typename T>
ad::Var baseline_forward(ad::Tape<T>& tape, const ModelShape& shape, std::span<const ad::Var> vars,
                         std::span<const T> features, std::size_t n) {
  const std::size_t h = shape.hidden, k = shape.input;
  if (features.size() != n * k) detail::fail("feature array has ", features.size(), " entries, expected ", n * k);
  std::vector<ad::Var> inputs;
  for (std::size_t t = 0; t < n; ++t) inputs.push_back(tape.constant({k, 1}, features.subspan(t * k, k)));

  std::vector<CellState> states[2];
  for (std::size_t l = 0; l < shape.layers; ++l) {
    for (int d = 0; d < 2; ++d) {
      const std::size_t base = 8 * l + 4 * d;
      const LstmVars<T> p{vars[base], vars[base + 1], vars[base + 2], vars[base + 3]};
      auto& out = states[d];
      out.assign(n, {});
      for (std::size_t step = 0; step < n; ++step) {
        const std::size_t t = d == 0 ? step : n - 1 - step;
        std::optional<CellState> prev;
        if (step > 0) prev = out[d == 0 ? t - 1 : t + 1];
        out[t] = standard_lstm_cell<T>(tape, inputs[t], prev, p, h);
      }
    }
    if (l + 1 < shape.layers) {
      for (std::size_t t = 0; t < n; ++t) {
        const ad::Var both[] = {states[0][t].h, states[1][t].h};
        inputs[t] = tape.concat(both);
      }
    }
  }
  return detail::readout(tape, vars, states[0], states[1]);
}

// Model input for one graph under one ordering.
template <typename T>
struct ModelInput {
  std::vector<T> features;
  SkipLinks links;
  std::size_t n = 0;
};

template <typename T>
ModelInput<T> make_input(const Graph& g, const NodeSequence& seq) {
  return {sequence_features<T>(seq), skip_links(g, seq.order), seq.size()};
}

template <typename T>
ad::Var model_forward(ad::Tape<T>& tape, const ModelShape& shape, std::span<const ad::Var> vars,
                      const ModelInput<T>& in) {
  return shape.kind == ModelKind::ours ? graph_lstm_forward<T>(tape, shape, vars, in.features, in.links)
                                       : baseline_forward<T>(tape, shape, vars, in.features, in.n);
}

// Forward pass through the tape; the reference for infer_sequence.
template <typename T>
std::vector<T> tape_predict_sequence(const ModelParams<T>& params, const ModelInput<T>& in) {
  ad::Tape<T> tape;
  const auto vars = bind_params(tape, params);
  const auto out = model_forward<T>(tape, params.shape, vars, in);
  const auto v = tape.value(out);
  return {v.begin(), v.end()};
}

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Eigen::Map<const RowMat<T>> tensor_map(const NamedTensor<T>& t) {
  return {t.data.data(), Eigen::Index(t.shape.rows), Eigen::Index(t.shape.cols)};
}

}  // namespace detail

// Same function as tape_predict_sequence without recording anything. Input
// projections for all steps are one matrix product. U_skip h_k depends only on
// k and is first needed two steps later, so it is computed once per node, in
// blocks, when a step first asks for it; that keeps U and U_skip from taking
// turns in cache at every step.
template <typename T>
std::vector<T> infer_sequence(const ModelParams<T>& params, const ModelInput<T>& in) {
  using Mat = detail::RowMat<T>;
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  const auto& shape = params.shape;
  const std::size_t n = in.n;
  const auto h = Eigen::Index(shape.hidden), k = Eigen::Index(shape.input);
  if (in.features.size() != n * std::size_t(k)) {
    detail::fail("feature array has ", in.features.size(), " entries, expected ", n * std::size_t(k));
  }
  if (params.tensors.size() != param_layout(shape).size()) detail::fail("parameter set does not match its shape");
  const auto sig = [](const auto& x) -> Vec { return (T(1) + (-x.array()).exp()).inverse().matrix(); };
  const auto th = [](const auto& x) -> Vec { return x.array().tanh().matrix(); };

  Mat x = Eigen::Map<const Mat>(in.features.data(), Eigen::Index(n), k);
  Mat hs[2], cs[2];
  const std::size_t layers = shape.kind == ModelKind::ours ? 1 : shape.layers;
  for (std::size_t l = 0; l < layers; ++l) {
    for (int d = 0; d < 2; ++d) {
      hs[d].setZero(Eigen::Index(n), h);
      cs[d].setZero(Eigen::Index(n), h);
      const std::size_t base = shape.kind == ModelKind::ours ? 4 * std::size_t(d) : 8 * l + 4 * std::size_t(d);
      const auto w = detail::tensor_map(params.tensors[base]);
      const auto u = detail::tensor_map(params.tensors[base + 1]);
      Mat proj = x * w.transpose();
      if (shape.kind == ModelKind::ours) {
        proj.rowwise() += detail::tensor_map(params.tensors[base + 3]).col(0).transpose();
      } else {
        proj.rowwise() += (detail::tensor_map(params.tensors[base + 2]).col(0) +
                           detail::tensor_map(params.tensors[base + 3]).col(0)).transpose();
      }
      // row p holds U_skip h at sequence position p once computed
      Mat zs;
      std::size_t ready = 0;
      if (shape.kind == ModelKind::ours) zs.resize(Eigen::Index(n), 4 * h);
      Vec pre(4 * h), c(h);
      for (std::size_t step = 0; step < n; ++step) {
        const std::size_t t = d == 0 ? step : n - 1 - step;
        const auto prev = Eigen::Index(d == 0 ? t - 1 : t + 1);
        pre = proj.row(Eigen::Index(t)).transpose();
        if (step > 0) pre.noalias() += u * hs[d].row(prev).transpose();
        std::span<const int> skips;
        if (shape.kind == ModelKind::ours) skips = d == 0 ? in.links.back[t] : in.links.ahead[t];
        if (!skips.empty() && ready + 1 < step) {
          const auto us = detail::tensor_map(params.tensors[base + 2]);
          const auto count = Eigen::Index(step - 1 - ready);
          // steps ready .. step-2 sit in a contiguous block of rows of hs
          const auto first = Eigen::Index(d == 0 ? ready : n - step + 1);
          zs.middleRows(first, count).noalias() = hs[d].middleRows(first, count) * us.transpose();
          ready = step - 1;
        }
        for (int s : skips) pre.head(3 * h) += zs.row(s).head(3 * h).transpose();
        c = sig(pre.segment(kInput * h, h)).cwiseProduct(th(pre.segment(kCandidate * h, h)));
        if (step > 0) c += sig(pre.segment(kForget * h, h)).cwiseProduct(cs[d].row(prev).transpose());
        for (int s : skips) {
          const Vec z = (proj.row(Eigen::Index(t)).segment(kForget * h, h) + zs.row(s).segment(kForget * h, h)).transpose();
          c += sig(z).cwiseProduct(cs[d].row(s).transpose());
        }
        cs[d].row(Eigen::Index(t)) = c.transpose();
        hs[d].row(Eigen::Index(t)) = sig(pre.segment(kOutput * h, h)).cwiseProduct(th(c)).transpose();
      }
    }
    x.resize(Eigen::Index(n), 2 * h);
    x << hs[0], hs[1];
  }
  const auto rw = detail::tensor_map(params.tensors[params.tensors.size() - 2]);
  const auto rb = detail::tensor_map(params.tensors.back());
  Mat out = x * rw.transpose();
  out.rowwise() += rb.col(0).transpose();
  return {out.data(), out.data() + out.size()};
}

// Inference convenience: coordinates in sequence order (position i = node order[i]).
template <typename T>
std::vector<T> predict_sequence(const ModelParams<T>& params, const ModelInput<T>& in) {
  return infer_sequence(params, in);
}

// Predicted layout indexed by node id.
template <typename T>
Layout predict_layout(const ModelParams<T>& params, const Graph& g, int start = 0) {
  if (params.shape.input == 0) detail::fail("model has zero input size");
  const auto seq = encode_bfs_sequence(g, start, params.shape.input);
  const auto coords = predict_sequence(params, make_input<T>(g, seq));
  Layout out(g.size());
  for (std::size_t i = 0; i < seq.size(); ++i) out[seq.order[i]] = {double(coords[2 * i]), double(coords[2 * i + 1])};
  return out;
}

}  // namespace gdraw
