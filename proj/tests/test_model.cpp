#include <gtest/gtest.h>

#include <random>

#include "gdraw/generate.hpp"
#include "gdraw/model.hpp"
#include "gdraw/train.hpp"
#include "support.hpp"

using namespace gdraw;
using gdraw::testing::path_graph;
using gdraw::testing::random_connected;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

std::vector<double> values(const ad::Tape<double>& t, ad::Var v) {
  auto s = t.value(v);
  return {s.begin(), s.end()};
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Plain row-major matrix-vector product, separate from the tape.
std::vector<double> mv(const std::vector<double>& w, const std::vector<double>& x, std::size_t rows) {
  std::vector<double> y(rows, 0.0);
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) y[r] += w[r * cols + c] * x[c];
  }
  return y;
}

struct CellWeights {
  std::vector<double> w, u, u_skip, b;
};

CellWeights random_cell(std::size_t h, std::size_t k, std::mt19937_64& rng) {
  return {random_vec(4 * h * k, rng), random_vec(4 * h * h, rng), random_vec(4 * h * h, rng), random_vec(4 * h, rng)};
}

GraphLstmVars<double> put(ad::Tape<double>& t, const CellWeights& c, std::size_t h, std::size_t k) {
  return {t.constant({4 * h, k}, c.w), t.constant({4 * h, h}, c.u), t.constant({4 * h, h}, c.u_skip),
          t.constant({4 * h, 1}, c.b)};
}

LstmVars<double> put_standard(ad::Tape<double>& t, const CellWeights& c, std::size_t h, std::size_t k) {
  const std::vector<double> zero(4 * h, 0.0);
  return {t.constant({4 * h, k}, c.w), t.constant({4 * h, h}, c.u), t.constant({4 * h, 1}, c.b),
          t.constant({4 * h, 1}, zero)};
}

CellState state(ad::Tape<double>& t, const std::vector<double>& h, const std::vector<double>& c) {
  return {t.constant({h.size(), 1}, h), t.constant({c.size(), 1}, c)};
}

ModelParams<double> random_params(const ModelShape& s, std::uint64_t seed, double scale = 0.5) {
  auto p = zero_params<double>(s);
  std::mt19937_64 rng(seed);
  for (auto& t : p.tensors) t.data = random_vec(t.data.size(), rng, scale);
  return p;
}

}  // namespace

TEST(GraphLstmCell, NoSkipsIsTheStandardCell) {
  std::mt19937_64 rng(51);
  const std::size_t h = 5, k = 4;
  for (int trial = 0; trial < 10; ++trial) {
    const auto cw = random_cell(h, k, rng);
    const auto x = random_vec(k, rng), h0 = random_vec(h, rng), c0 = random_vec(h, rng);
    ad::Tape<double> t;
    const ad::Var xv = t.constant({k, 1}, x);
    const std::optional<CellState> prev = state(t, h0, c0);
    const auto ours = graph_lstm_cell<double>(t, xv, prev, {}, put(t, cw, h, k), h);
    const auto std_ = standard_lstm_cell<double>(t, xv, prev, put_standard(t, cw, h, k), h);
    EXPECT_EQ(values(t, ours.h), values(t, std_.h));
    EXPECT_EQ(values(t, ours.c), values(t, std_.c));
  }
}

TEST(GraphLstmCell, FirstStepSeesOnlyInputAndBias) {
  std::mt19937_64 rng(52);
  const std::size_t h = 4, k = 3;
  auto cw = random_cell(h, k, rng);
  const auto x = random_vec(k, rng);
  ad::Tape<double> t;
  const ad::Var xv = t.constant({k, 1}, x);
  const auto none = graph_lstm_cell<double>(t, xv, std::nullopt, {}, put(t, cw, h, k), h);
  const std::vector<double> zero(h, 0.0);
  const auto zero_state = graph_lstm_cell<double>(t, xv, state(t, zero, zero), {}, put(t, cw, h, k), h);
  EXPECT_EQ(values(t, none.h), values(t, zero_state.h));
  EXPECT_EQ(values(t, none.c), values(t, zero_state.c));
  cw.u = random_vec(cw.u.size(), rng);
  cw.u_skip = random_vec(cw.u_skip.size(), rng);
  const auto other = graph_lstm_cell<double>(t, xv, std::nullopt, {}, put(t, cw, h, k), h);
  EXPECT_EQ(values(t, none.h), values(t, other.h));
  // and against the scalar definition
  const auto pre = mv(cw.w, x, 4 * h);
  for (std::size_t j = 0; j < h; ++j) {
    const double i = sig(pre[j] + cw.b[j]), o = sig(pre[h + j] + cw.b[h + j]);
    const double c = i * std::tanh(pre[2 * h + j] + cw.b[2 * h + j]);
    EXPECT_NEAR(values(t, none.c)[j], c, 1e-15);
    EXPECT_NEAR(values(t, none.h)[j], o * std::tanh(c), 1e-15);
  }
}

TEST(GraphLstmCell, SkipEqualToChainDoublesRecurrence) {
  std::mt19937_64 rng(53);
  const std::size_t h = 4, k = 3;
  auto cw = random_cell(h, k, rng);
  cw.u_skip = cw.u;
  const auto x = random_vec(k, rng), h0 = random_vec(h, rng), c0 = random_vec(h, rng);
  ad::Tape<double> t;
  const CellState s = state(t, h0, c0);
  const CellState skips[] = {s};
  const auto out = graph_lstm_cell<double>(t, t.constant({k, 1}, x), s, skips, put(t, cw, h, k), h);

  const auto wx = mv(cw.w, x, 4 * h), uh = mv(cw.u, h0, 4 * h);
  for (std::size_t j = 0; j < h; ++j) {
    const double i = sig(wx[j] + 2 * uh[j] + cw.b[j]);
    const double o = sig(wx[h + j] + 2 * uh[h + j] + cw.b[h + j]);
    const double cand = std::tanh(wx[2 * h + j] + 2 * uh[2 * h + j] + cw.b[2 * h + j]);
    const double f = sig(wx[3 * h + j] + uh[3 * h + j] + cw.b[3 * h + j]);
    const double c = i * cand + 2 * f * c0[j];
    EXPECT_NEAR(values(t, out.c)[j], c, 1e-14);
    EXPECT_NEAR(values(t, out.h)[j], o * std::tanh(c), 1e-14);
  }
}

TEST(GraphLstmCell, EachSkipHasItsOwnForgetGate) {
  std::mt19937_64 rng(54);
  const std::size_t h = 3, k = 2;
  const auto cw = random_cell(h, k, rng);
  const auto x = random_vec(k, rng);
  const auto h1 = random_vec(h, rng), c1 = random_vec(h, rng);
  const auto h2 = random_vec(h, rng), c2 = random_vec(h, rng);
  const auto h3 = random_vec(h, rng), c3 = random_vec(h, rng);
  ad::Tape<double> t;
  const CellState skips[] = {state(t, h2, c2), state(t, h3, c3)};
  const auto out = graph_lstm_cell<double>(t, t.constant({k, 1}, x), state(t, h1, c1), skips, put(t, cw, h, k), h);

  const auto wx = mv(cw.w, x, 4 * h), uh = mv(cw.u, h1, 4 * h);
  const auto s2 = mv(cw.u_skip, h2, 4 * h), s3 = mv(cw.u_skip, h3, 4 * h);
  for (std::size_t j = 0; j < h; ++j) {
    auto gate = [&](std::size_t g) { return wx[g * h + j] + uh[g * h + j] + s2[g * h + j] + s3[g * h + j] + cw.b[g * h + j]; };
    const double i = sig(gate(0)), o = sig(gate(1)), cand = std::tanh(gate(2));
    const double f1 = sig(wx[3 * h + j] + uh[3 * h + j] + cw.b[3 * h + j]);
    const double f2 = sig(wx[3 * h + j] + s2[3 * h + j] + cw.b[3 * h + j]);
    const double f3 = sig(wx[3 * h + j] + s3[3 * h + j] + cw.b[3 * h + j]);
    const double c = i * cand + f1 * c1[j] + f2 * c2[j] + f3 * c3[j];
    EXPECT_NEAR(values(t, out.c)[j], c, 1e-14);
    EXPECT_NEAR(values(t, out.h)[j], o * std::tanh(c), 1e-14);
  }
}

TEST(StandardLstmCell, ZeroWeightsGiveZeroHidden) {
  const std::size_t h = 6, k = 4;
  const CellWeights zero{std::vector<double>(4 * h * k), std::vector<double>(4 * h * h), {}, std::vector<double>(4 * h)};
  std::mt19937_64 rng(55);
  ad::Tape<double> t;
  std::optional<CellState> prev;
  for (int step = 0; step < 5; ++step) {
    prev = standard_lstm_cell<double>(t, t.constant({k, 1}, random_vec(k, rng)), prev, put_standard(t, zero, h, k), h);
    for (double v : values(t, prev->h)) EXPECT_EQ(v, 0.0);
  }
}

TEST(StandardLstmCell, SaturatedForgetKeepsCell) {
  const std::size_t h = 3, k = 2;
  std::mt19937_64 rng(56);
  auto cw = random_cell(h, k, rng);
  for (std::size_t j = 0; j < h; ++j) {
    cw.b[j] = -60.0;         // input gate closed
    cw.b[3 * h + j] = 60.0;  // forget gate open
  }
  const auto h0 = random_vec(h, rng), c0 = random_vec(h, rng);
  ad::Tape<double> t;
  const auto out = standard_lstm_cell<double>(t, t.constant({k, 1}, random_vec(k, rng)), state(t, h0, c0),
                                              put_standard(t, cw, h, k), h);
  for (std::size_t j = 0; j < h; ++j) EXPECT_NEAR(values(t, out.c)[j], c0[j], 1e-15);
}

TEST(StandardLstmCell, ThreeStepsAgainstScalarLoop) {
  const std::size_t h = 3, k = 2;
  std::mt19937_64 rng(57);
  const auto cw = random_cell(h, k, rng);
  const auto b_hh = random_vec(4 * h, rng);
  std::vector<std::vector<double>> xs{random_vec(k, rng), random_vec(k, rng), random_vec(k, rng)};

  ad::Tape<double> t;
  LstmVars<double> vars{t.constant({4 * h, k}, cw.w), t.constant({4 * h, h}, cw.u), t.constant({4 * h, 1}, cw.b),
                        t.constant({4 * h, 1}, b_hh)};
  std::optional<CellState> prev;
  std::vector<double> hs(h, 0.0), cs(h, 0.0);
  for (const auto& x : xs) {
    prev = standard_lstm_cell<double>(t, t.constant({k, 1}, x), prev, vars, h);
    std::vector<double> nh(h), nc(h);
    for (std::size_t j = 0; j < h; ++j) {
      double a[4];
      for (std::size_t g = 0; g < 4; ++g) {
        const std::size_t r = g * h + j;
        a[g] = cw.b[r] + b_hh[r];
        for (std::size_t q = 0; q < k; ++q) a[g] += cw.w[r * k + q] * x[q];
        for (std::size_t q = 0; q < h; ++q) a[g] += cw.u[r * h + q] * hs[q];
      }
      nc[j] = sig(a[0]) * std::tanh(a[2]) + sig(a[3]) * cs[j];
      nh[j] = sig(a[1]) * std::tanh(nc[j]);
    }
    hs = nh;
    cs = nc;
    for (std::size_t j = 0; j < h; ++j) {
      EXPECT_NEAR(values(t, prev->h)[j], hs[j], 1e-14);
      EXPECT_NEAR(values(t, prev->c)[j], cs[j], 1e-14);
    }
  }
}

TEST(SkipLinks, OnlyNonChainEdgesFromTheWholeGraph) {
  // 0-1-2-3-4 path plus chord 0-4 and 1-3
  Graph g(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4}, {1, 3}});
  const std::vector<int> order{0, 1, 2, 3, 4};
  const auto l = skip_links(g, order);
  EXPECT_EQ(l.back[4], (std::vector<int>{0}));
  EXPECT_EQ(l.back[3], (std::vector<int>{1}));
  EXPECT_TRUE(l.back[2].empty());
  EXPECT_EQ(l.ahead[0], (std::vector<int>{4}));
  EXPECT_EQ(l.ahead[1], (std::vector<int>{3}));
  // an edge 4 positions back survives even if the feature window is 1
  const auto seq = encode_adjacency_vectors(g, order, 1);
  EXPECT_EQ(seq.row(4)[0], 1);
  EXPECT_EQ(make_input<double>(g, seq).links.back[4], (std::vector<int>{0}));
}

TEST(Model, SingleNodeIsReadoutOfBothDirections) {
  const ModelShape s{ModelKind::ours, 3, 2, 1};
  const auto p = random_params(s, 58);
  const Graph g(1, {});
  const auto seq = encode_adjacency_vectors(g, std::vector<int>{0}, 2);
  const auto out = predict_sequence(p, make_input<double>(g, seq));
  ASSERT_EQ(out.size(), 2u);

  ad::Tape<double> t;
  const ad::Var x = t.constant({2, 1}, std::vector<double>{0, 0});
  std::vector<double> both;
  for (int d = 0; d < 2; ++d) {
    const std::string pre = direction_name(d);
    const GraphLstmVars<double> v{t.constant({12, 2}, p.at(pre + ".W").data), t.constant({12, 3}, p.at(pre + ".U").data),
                                  t.constant({12, 3}, p.at(pre + ".U_skip").data), t.constant({12, 1}, p.at(pre + ".b").data)};
    const auto c = graph_lstm_cell<double>(t, x, std::nullopt, {}, v, 3);
    const auto hv = values(t, c.h);
    both.insert(both.end(), hv.begin(), hv.end());
  }
  auto xy = mv(p.at("readout.W").data, both, 2);
  EXPECT_NEAR(out[0], xy[0] + p.at("readout.b").data[0], 1e-14);
  EXPECT_NEAR(out[1], xy[1] + p.at("readout.b").data[1], 1e-14);
}

TEST(Model, ReducesToOneLayerBidirectionalLstmOnAPath) {
  const std::size_t h = 6, k = 4;
  const ModelShape ours{ModelKind::ours, h, k, 1};
  const ModelShape base{ModelKind::baseline, h, k, 1};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto p = random_params(ours, 100 + seed);
    for (int d = 0; d < 2; ++d) {
      auto& skip = p.at(std::string(direction_name(d)) + ".U_skip").data;
      std::fill(skip.begin(), skip.end(), 0.0);
    }
    auto q = zero_params<double>(base);
    for (int d = 0; d < 2; ++d) {
      const std::string a = direction_name(d), b = "l1." + a;
      q.at(b + ".W_ih").data = p.at(a + ".W").data;
      q.at(b + ".W_hh").data = p.at(a + ".U").data;
      q.at(b + ".b_ih").data = p.at(a + ".b").data;
    }
    q.at("readout.W").data = p.at("readout.W").data;
    q.at("readout.b").data = p.at("readout.b").data;

    const auto g = path_graph(15);
    const auto seq = encode_bfs_sequence(g, 0, k);
    ASSERT_EQ(seq.order.front(), 0);
    const auto in = make_input<double>(g, seq);
    for (const auto& l : in.links.back) ASSERT_TRUE(l.empty());
    const auto a = tape_predict_sequence(p, in);
    const auto b = tape_predict_sequence(q, in);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-10);
    const auto fa = infer_sequence(p, in), fb = infer_sequence(q, in);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(fa[i], fb[i], 1e-10);
  }
}

TEST(Model, InferenceMatchesTheTape) {
  std::mt19937_64 rng(61);
  const ModelShape shapes[] = {{ModelKind::ours, 7, 5, 1}, {ModelKind::baseline, 6, 5, 1}, {ModelKind::baseline, 5, 4, 3}};
  for (const auto& s : shapes) {
    for (int trial = 0; trial < 10; ++trial) {
      const auto g = gdraw::testing::random_connected(3 + int(rng() % 20), 0.25, rng);
      const auto p = random_params(s, 200 + trial);
      const auto in = make_input<double>(g, encode_bfs_sequence(g, int(rng() % g.size()), s.input));
      const auto a = tape_predict_sequence(p, in), b = infer_sequence(p, in);
      ASSERT_EQ(a.size(), b.size());
      for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);

      const auto pf = p.cast<float>();
      const auto inf = make_input<float>(g, encode_bfs_sequence(g, 0, s.input));
      const auto af = tape_predict_sequence(pf, inf), bf = infer_sequence(pf, inf);
      for (std::size_t i = 0; i < af.size(); ++i) EXPECT_NEAR(af[i], bf[i], 1e-5);
    }
  }
}

TEST(Model, SkipPatternChangesTheOutput) {
  const ModelShape s{ModelKind::ours, 8, 5, 1};
  const auto p = random_params(s, 59);
  // same feature rows, different real-edge positions
  const auto g1 = Graph(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 3}});
  const auto g2 = Graph(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {1, 4}});
  const std::vector<int> order{0, 1, 2, 3, 4, 5};
  auto in1 = make_input<double>(g1, encode_adjacency_vectors(g1, order, 5));
  auto in2 = make_input<double>(g2, encode_adjacency_vectors(g2, order, 5));
  in2.features = in1.features;
  ASSERT_NE(in1.links.back, in2.links.back);
  EXPECT_NE(predict_sequence(p, in1), predict_sequence(p, in2));
}

TEST(Model, OutputShapeAcrossSizes) {
  const ModelShape s{ModelKind::ours, 12, 35, 1};
  const ModelShape b{ModelKind::baseline, 12, 35, 2};
  const auto p = init_params<double>(s, 1);
  const auto q = init_params<double>(b, 1);
  std::mt19937_64 rng(60);
  for (int n = 20; n <= 50; ++n) {
    const auto g = random_connected(n, 0.08, rng);
    const auto seq = encode_bfs_sequence(g, 0, 35);
    EXPECT_EQ(predict_sequence(p, make_input<double>(g, seq)).size(), std::size_t(2 * n));
    EXPECT_EQ(predict_sequence(q, make_input<double>(g, seq)).size(), std::size_t(2 * n));
    EXPECT_EQ(predict_layout(p, g).size(), std::size_t(n));
  }
}

TEST(Model, DeterministicForward) {
  const auto p = init_params<double>({ModelKind::ours, 16, 35, 1}, 3);
  std::mt19937_64 rng(61);
  const auto g = random_connected(30, 0.1, rng);
  EXPECT_EQ(predict_layout(p, g), predict_layout(p, g));
  const auto f = init_params<float>({ModelKind::ours, 16, 35, 1}, 3);
  EXPECT_EQ(predict_layout(f, g), predict_layout(f, g));
}

TEST(Model, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(62);
  for (auto kind : {ModelKind::ours, ModelKind::baseline}) {
    const ModelShape s{kind, 3, 4, kind == ModelKind::ours ? 1u : 2u};
    for (int trial = 0; trial < 3; ++trial) {
      const auto g = random_connected(6, 0.4, rng);
      const auto target = gdraw::testing::random_layout(6, rng, 1.0);
      const auto p = init_params<double>(s, rng());
      auto fn = gdraw::testing::model_loss_fn(p, make_sample<double>({g, target}, int(rng() % 6), s.input));
      const auto coords = gdraw::testing::checkable_coords(p);
      // at 1e-6 one ulp of the loss over 2h already reaches 1e-4 of the
      // smallest gradients; 3e-5 balances that against truncation
      const auto r = ad::gradient_check(fn, gdraw::testing::flat_params(p), 3e-5, coords);
      EXPECT_LT(r.max_rel_error, 1e-4) << model_name(kind) << " worst index " << r.worst_index << " analytic " << r.analytic << " numeric " << r.numeric;
    }
  }
}

TEST(Model, ReadoutBiasGetsNoGradient) {
  std::mt19937_64 rng(63);
  const ModelShape s{ModelKind::ours, 4, 4, 1};
  const auto g = random_connected(7, 0.3, rng);
  const auto p = init_params<double>(s, 8);
  const auto sample = make_sample<double>({g, gdraw::testing::random_layout(7, rng, 1.0)}, 0, 4);
  auto grads = p.zeros_like();
  sample_loss(p, sample, &grads);
  for (double v : grads.at("readout.b").data) EXPECT_LE(std::abs(v), 1e-14);
  auto shifted = p;
  shifted.at("readout.b").data = {5.0, -3.0};
  EXPECT_NEAR(sample_loss(shifted, sample), sample_loss(p, sample), 1e-12);
}

TEST(ParamCount, FullShapes) {
  EXPECT_EQ(param_count(full_shape(ModelKind::ours)), 1123330u);
  EXPECT_EQ(param_count(full_shape(ModelKind::baseline)), 5330944u + 1026u);
  EXPECT_EQ(init_params<float>(full_shape(ModelKind::ours), 1).count(), 1123330u);
  EXPECT_EQ(param_count(ModelShape{ModelKind::ours, 0, 35, 1}), 0u);
  EXPECT_EQ(param_count(ModelShape{ModelKind::baseline, 0, 35, 4}), 0u);
}

TEST(Init, SameSeedSameParams) {
  const ModelShape s{ModelKind::baseline, 10, 7, 2};
  const auto a = init_params<double>(s, 9), b = init_params<double>(s, 9), c = init_params<double>(s, 10);
  for (std::size_t i = 0; i < a.tensors.size(); ++i) EXPECT_EQ(a.tensors[i].data, b.tensors[i].data);
  EXPECT_NE(a.tensors[0].data, c.tensors[0].data);
}

TEST(Init, ForgetBiasIsOneAndOtherBiasesZero) {
  const std::size_t h = 10;
  for (auto kind : {ModelKind::ours, ModelKind::baseline}) {
    const auto p = init_params<double>({kind, h, 7, kind == ModelKind::ours ? 1u : 3u}, 4);
    for (const auto& t : p.tensors) {
      if (!is_bias(t.name)) continue;
      for (std::size_t i = 0; i < t.data.size(); ++i) {
        const bool forget = i >= kForget * h && t.name != "readout.b" && !t.name.ends_with(".b_hh");
        EXPECT_EQ(t.data[i], forget ? 1.0 : 0.0) << t.name << "[" << i << "]";
      }
    }
  }
}

TEST(Init, WeightsInsideGlorotBound) {
  const std::size_t h = 10;
  for (auto kind : {ModelKind::ours, ModelKind::baseline}) {
    const auto p = init_params<double>({kind, h, 7, kind == ModelKind::ours ? 1u : 3u}, 5);
    for (const auto& t : p.tensors) {
      if (is_bias(t.name)) continue;
      const double fan_out = t.name == "readout.W" ? 2.0 : double(h);
      const double s = std::sqrt(6.0 / (double(t.shape.cols) + fan_out));
      double largest = 0.0;
      for (double v : t.data) {
        EXPECT_LE(std::abs(v), s) << t.name;
        largest = std::max(largest, std::abs(v));
      }
      EXPECT_GT(largest, 0.5 * s) << t.name;
    }
  }
}
