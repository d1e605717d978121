#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gdraw/autodiff.hpp"
#include "gdraw/error.hpp"
#include "gdraw/graph.hpp"
#include "gdraw/model.hpp"
#include "gdraw/procrustes.hpp"

namespace gdraw {

struct TrainConfig {
  double learning_rate = 0.0015;
  std::size_t batch_size = 128;
  int max_epochs = 350;
  int patience = 20;  // epochs without validation improvement before stopping
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  ModelParams<T> m;
  ModelParams<T> v;
  std::uint64_t step = 0;
  std::uint64_t skipped = 0;  // updates refused because of non-finite gradients

  static AdamState for_params(const ModelParams<T>& p) { return {p.zeros_like(), p.zeros_like(), 0, 0}; }
};

// One bias-corrected Adam update. Returns false (and leaves params and
// moments untouched) when any gradient entry is non-finite.
template <typename T>
bool adam_step(ModelParams<T>& params, const ModelParams<T>& grads, AdamState<T>& state, const TrainConfig& cfg) {
  if (grads.tensors.size() != params.tensors.size()) detail::fail("adam: gradient/parameter layout mismatch");
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    if (grads.tensors[i].data.size() != params.tensors[i].data.size()) {
      detail::fail("adam: size mismatch in tensor ", params.tensors[i].name);
    }
    for (T g : grads.tensors[i].data) {
      if (!std::isfinite(g)) {
        ++state.skipped;
        return false;
      }
    }
  }
  ++state.step;
  const T b1 = T(cfg.beta1), b2 = T(cfg.beta2);
  const T correct1 = T(1) - T(std::pow(cfg.beta1, double(state.step)));
  const T correct2 = T(1) - T(std::pow(cfg.beta2, double(state.step)));
  const T lr = T(cfg.learning_rate), eps = T(cfg.epsilon);
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    auto& p = params.tensors[i].data;
    const auto& g = grads.tensors[i].data;
    auto& m = state.m.tensors[i].data;
    auto& v = state.v.tensors[i].data;
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      const T mhat = m[j] / correct1;
      const T vhat = v[j] / correct2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
  return true;
}

// A graph with its ground-truth drawing (indexed by node id).
struct DrawingExample {
  Graph graph;
  Layout target;
};

// Model input plus the target rows permuted into sequence order, centered
// and scaled to unit RMS radius (the statistic ignores both).
template <typename T>
struct TrainSample {
  NodeSequence seq;
  ModelInput<T> input;
  std::vector<T> target;
};

inline std::vector<double> sequence_target(const Layout& target, std::span<const int> order) {
  std::vector<double> flat;
  flat.reserve(2 * order.size());
  for (int v : order) {
    flat.push_back(target[v].x);
    flat.push_back(target[v].y);
  }
  auto c = center<double>(flat);
  double ss = 0.0;
  for (double x : c) ss += x * x;
  const double rms = std::sqrt(ss / double(order.size()));
  if (!(rms > 0.0)) detail::fail("degenerate layout");
  for (auto& x : c) x /= rms;
  return c;
}

template <typename T>
TrainSample<T> make_sample(const DrawingExample& ex, int start, std::size_t k) {
  if (ex.target.size() != ex.graph.size()) detail::fail("layout has ", ex.target.size(), " points for ", ex.graph.size(), " nodes");
  TrainSample<T> s;
  s.seq = encode_bfs_sequence(ex.graph, start, k);
  s.input = make_input<T>(ex.graph, s.seq);
  const auto t = sequence_target(ex.target, s.seq.order);
  s.target.assign(t.begin(), t.end());
  return s;
}

// Uniform random BFS start.
inline NodeSequence augment_random_bfs_start(const Graph& g, std::mt19937_64& rng, std::size_t k) {
  std::uniform_int_distribution<int> pick(0, int(g.size()) - 1);
  return encode_bfs_sequence(g, pick(rng), k);
}

// Procrustes loss of the model on one sample; with `grads` set, the gradient
// scaled by `weight` is accumulated into it.
template <typename T>
double sample_loss(const ModelParams<T>& params, const TrainSample<T>& s, ModelParams<T>* grads = nullptr,
                   T weight = T(1)) {
  ad::Tape<T> tape;
  const auto vars = bind_params(tape, params, grads);
  const auto coords = model_forward<T>(tape, params.shape, vars, s.input);
  const auto loss = procrustes_loss<T>(tape, coords, s.target);
  if (grads != nullptr) tape.backward(loss, weight);
  return double(tape.scalar(loss));
}

struct EpochStats {
  int epoch = 0;
  std::vector<double> batch_losses;
  double mean_loss = 0.0;
  std::size_t skipped_entries = 0;
  std::size_t skipped_updates = 0;
  double seconds = 0.0;
};

struct EvalResult {
  double mean = 0.0;
  std::vector<double> per_graph;
};

// Mean and per-graph Procrustes statistic using the BFS from node 0. A
// collapsed prediction (all points coincident) scores 1.
template <typename T>
EvalResult evaluate_split(std::span<const DrawingExample> split, const ModelParams<T>& params) {
  EvalResult out;
  for (const auto& ex : split) {
    const auto pred = predict_layout(params, ex.graph, 0);
    double r2 = 1.0;
    try {
      r2 = procrustes_statistic(pred, ex.target);
    } catch (const Error&) {
    }
    out.per_graph.push_back(r2);
  }
  if (!out.per_graph.empty()) {
    out.mean = std::accumulate(out.per_graph.begin(), out.per_graph.end(), 0.0) / double(out.per_graph.size());
  }
  return out;
}

struct BatchRecord {
  int epoch = 0;
  std::size_t batch = 0;
  double loss = 0.0;
  double wall_seconds = 0.0;
};

// Owns parameters and optimizer state; one Adam step per batch.
template <typename T>
class Trainer {
 public:
  using BatchLog = std::function<void(const BatchRecord&)>;

  Trainer(ModelParams<T> params, TrainConfig cfg)
      : params_(std::move(params)), cfg_(cfg), adam_(AdamState<T>::for_params(params_)), rng_(cfg.seed) {
    if (cfg_.batch_size == 0) detail::fail("batch size must be positive");
    if (!(cfg_.learning_rate >= 0.0)) detail::fail("learning rate must be non-negative");
  }

  const ModelParams<T>& params() const { return params_; }
  ModelParams<T>& params() { return params_; }
  const AdamState<T>& optimizer() const { return adam_; }
  AdamState<T>& optimizer() { return adam_; }
  const TrainConfig& config() const { return cfg_; }
  int epoch() const { return epoch_; }
  void set_epoch(int e) { epoch_ = e; }
  void set_batch_log(BatchLog log) { log_ = std::move(log); }

  EpochStats train_epoch(std::span<const DrawingExample> train) {
    if (train.empty()) detail::fail("training split is empty");
    const auto t0 = std::chrono::steady_clock::now();
    EpochStats stats;
    stats.epoch = ++epoch_;
    std::vector<std::size_t> idx(train.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng_);

    auto grads = params_.zeros_like();
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t begin = 0; begin < idx.size(); begin += cfg_.batch_size) {
      const std::size_t end = std::min(idx.size(), begin + cfg_.batch_size);
      // draw every start first so the RNG stream does not depend on skips
      std::vector<int> starts;
      for (std::size_t j = begin; j < end; ++j) {
        std::uniform_int_distribution<int> pick(0, int(train[idx[j]].graph.size()) - 1);
        starts.push_back(pick(rng_));
      }
      std::vector<TrainSample<T>> batch;
      for (std::size_t j = begin; j < end; ++j) {
        try {
          batch.push_back(make_sample<T>(train[idx[j]], starts[j - begin], params_.shape.input));
        } catch (const Error&) {
          ++stats.skipped_entries;
        }
      }
      if (batch.empty()) continue;
      for (auto& t : grads.tensors) std::fill(t.data.begin(), t.data.end(), T(0));
      const T weight = T(1) / T(batch.size());
      double batch_loss = 0.0;
      for (const auto& s : batch) batch_loss += sample_loss(params_, s, &grads, weight);
      batch_loss /= double(batch.size());
      if (!adam_step(params_, grads, adam_, cfg_)) ++stats.skipped_updates;
      stats.batch_losses.push_back(batch_loss);
      total += batch_loss * double(batch.size());
      counted += batch.size();
      if (log_) {
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log_({stats.epoch, stats.batch_losses.size() - 1, batch_loss, wall});
      }
    }
    stats.mean_loss = counted > 0 ? total / double(counted) : std::numeric_limits<double>::quiet_NaN();
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return stats;
  }

  // Mean training loss at the canonical start (node 0), no update.
  double training_loss(std::span<const DrawingExample> data) const {
    return evaluate_split(data, params_).mean;
  }

 private:
  ModelParams<T> params_;
  TrainConfig cfg_;
  AdamState<T> adam_;
  std::mt19937_64 rng_;
  int epoch_ = 0;
  BatchLog log_;
};

struct FitReport {
  std::vector<EpochStats> epochs;
  std::vector<double> val_means;
  int best_epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();
  bool early_stopped = false;
};

// Trains up to cfg.max_epochs; stops after `patience` epochs without a new
// best validation mean and restores the best parameters. Without a
// validation split the last parameters are kept.
template <typename T>
FitReport fit(Trainer<T>& trainer, std::span<const DrawingExample> train, std::span<const DrawingExample> val,
              const std::function<void(const EpochStats&, double)>& on_epoch = {}) {
  FitReport report;
  ModelParams<T> best = trainer.params();
  int since_best = 0;
  for (int e = 0; e < trainer.config().max_epochs; ++e) {
    auto stats = trainer.train_epoch(train);
    double val_mean = std::numeric_limits<double>::quiet_NaN();
    if (!val.empty()) {
      val_mean = evaluate_split(val, trainer.params()).mean;
      report.val_means.push_back(val_mean);
      if (val_mean < report.best_val) {
        report.best_val = val_mean;
        report.best_epoch = stats.epoch;
        best = trainer.params();
        since_best = 0;
      } else {
        ++since_best;
      }
    }
    if (on_epoch) on_epoch(stats, val_mean);
    report.epochs.push_back(std::move(stats));
    if (!val.empty() && since_best >= trainer.config().patience) {
      report.early_stopped = true;
      break;
    }
  }
  if (!val.empty()) trainer.params() = best;
  return report;
}

}  // namespace gdraw
