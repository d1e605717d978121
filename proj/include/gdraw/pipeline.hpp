#pragma once

// End-to-end steps behind the command-line tool: preset datasets, ground-truth
// layout passes, prediction and metric reports.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gdraw/error.hpp"
#include "gdraw/generate.hpp"
#include "gdraw/graph.hpp"
#include "gdraw/io.hpp"
#include "gdraw/layout.hpp"
#include "gdraw/metrics.hpp"
#include "gdraw/model.hpp"
#include "gdraw/procrustes.hpp"

namespace gdraw {

// key=value overrides collected from --config flags.
using Overrides = std::map<std::string, std::string>;

inline Overrides parse_overrides(const std::vector<std::string>& items) {
  Overrides out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) detail::fail("config override '", item, "' is not key=value");
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

inline double get_double(const Overrides& o, const std::string& key, double fallback) {
  auto it = o.find(key);
  if (it == o.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    detail::fail("config value for '", key, "' is not a number: ", it->second);
  }
}

inline long long get_int(const Overrides& o, const std::string& key, long long fallback) {
  auto it = o.find(key);
  if (it == o.end()) return fallback;
  try {
    std::size_t used = 0;
    const long long v = std::stoll(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    detail::fail("config value for '", key, "' is not an integer: ", it->second);
  }
}

// Rejects override keys not in `known`.
inline void check_keys(const Overrides& o, const std::vector<std::string>& known) {
  for (const auto& [k, v] : o) {
    if (std::find(known.begin(), known.end(), k) == known.end()) detail::fail("unknown config key '", k, "'");
  }
}

struct PresetInfo {
  std::string name;
  std::size_t train = 0, val = 0, test = 0;
};

inline std::vector<PresetInfo> presets() {
  return {{"grid", 72, 24, 24},
          {"star", 120, 40, 40},
          {"clustered", 26000, 3000, 3000},
          {"clustered-desk", 2000, 250, 250}};
}

namespace detail {

inline DrawingDataset assemble(std::vector<Graph> graphs, std::vector<json> gen, const std::string& preset,
                               std::array<double, 3> fractions, std::uint64_t seed, std::vector<std::string>* warnings) {
  const auto split = split_dataset(graphs, fractions, seed ^ 0x9e3779b97f4a7c15ull);
  DrawingDataset d;
  d.metadata = {{"preset", preset},
                {"seed", seed},
                {"fractions", fractions},
                {"evicted_duplicates", split.evicted},
                {"isomorphism_check", "weisfeiler-lehman hash, 3 rounds"}};
  std::size_t serial = 0;
  for (std::size_t i : split.kept) {
    char id[32];
    std::snprintf(id, sizeof id, "%s-%05zu", preset.c_str(), serial++);
    DatasetEntry e;
    e.id = id;
    e.graph = std::move(graphs[i]);
    e.split = split.labels[i];
    e.gen = std::move(gen[i]);
    d.entries.push_back(std::move(e));
  }
  if (warnings != nullptr) warnings->insert(warnings->end(), split.warnings.begin(), split.warnings.end());
  return d;
}

}  // namespace detail

// Generates a preset corpus. Grid: every r x c lattice with 10 <= r <= c <= 24
// (120 graphs). Star: 9..208 leaves (200 graphs). Clustered: planted-partition
// graphs with 20..50 nodes and 2..12 communities.
inline DrawingDataset generate_preset(const std::string& preset, std::uint64_t seed, const Overrides& o = {},
                                      std::vector<std::string>* warnings = nullptr) {
  std::vector<Graph> graphs;
  std::vector<json> gen;
  std::array<double, 3> fractions{};
  if (preset == "grid") {
    check_keys(o, {"min", "max"});
    const int lo = int(get_int(o, "min", 10)), hi = int(get_int(o, "max", 24));
    for (int r = lo; r <= hi; ++r) {
      for (int c = r; c <= hi; ++c) {
        graphs.push_back(gen_grid(r, c));
        gen.push_back({{"kind", "grid"}, {"rows", r}, {"cols", c}});
      }
    }
    fractions = {0.6, 0.2, 0.2};
  } else if (preset == "star") {
    check_keys(o, {"min", "max"});
    const int lo = int(get_int(o, "min", 9)), hi = int(get_int(o, "max", 208));
    for (int leaves = lo; leaves <= hi; ++leaves) {
      graphs.push_back(gen_star(leaves));
      gen.push_back({{"kind", "star"}, {"leaves", leaves}});
    }
    fractions = {0.6, 0.2, 0.2};
  } else if (preset == "clustered" || preset == "clustered-desk") {
    const bool desk = preset == "clustered-desk";
    check_keys(o, {"count", "train", "val", "test"});
    const auto count = std::size_t(get_int(o, "count", desk ? 2500 : 32000));
    const double tr = get_double(o, "train", desk ? 0.8 : 26000.0 / 32000.0);
    const double va = get_double(o, "val", desk ? 0.1 : 3000.0 / 32000.0);
    const double te = get_double(o, "test", 1.0 - tr - va);
    fractions = {tr, va, te};
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
      const auto sample = sample_general_graph(rng);
      const auto& spec = sample.spec;
      graphs.push_back(sample.result.graph);
      gen.push_back({{"kind", "clustered"},
                     {"generator", "planted-partition (LFR substitute)"},
                     {"n", spec.n},
                     {"avg_degree", spec.avg_degree},
                     {"communities", spec.communities},
                     {"mixing", spec.mixing},
                     {"seed", spec.seed},
                     {"attempts", sample.result.attempts},
                     {"repaired", sample.result.repaired},
                     {"spec_redraws", sample.redraws}});
    }
  } else {
    detail::fail("unknown preset '", preset, "' (expected grid, star, clustered or clustered-desk)");
  }
  auto d = detail::assemble(std::move(graphs), std::move(gen), preset, fractions, seed, warnings);
  return d;
}

// Generates from a spec document:
// {"graphs": [{"kind": "grid", "rows": 3, "cols": 4}, {"kind": "star", "leaves": 5},
//             {"kind": "clustered", "n": 30, ...}], "fractions": [0.6, 0.2, 0.2]}
inline DrawingDataset generate_from_spec(const json& spec, std::uint64_t seed,
                                         std::vector<std::string>* warnings = nullptr) {
  if (!spec.contains("graphs") || !spec["graphs"].is_array()) detail::fail("spec needs a \"graphs\" array");
  std::array<double, 3> fractions{1.0, 0.0, 0.0};
  if (spec.contains("fractions")) fractions = spec["fractions"].get<std::array<double, 3>>();
  std::vector<Graph> graphs;
  std::vector<json> gen;
  std::uint64_t serial = 0;
  for (const auto& item : spec["graphs"]) {
    const auto kind = item.value("kind", std::string());
    if (kind == "grid") {
      graphs.push_back(gen_grid(item.at("rows").get<int>(), item.at("cols").get<int>()));
    } else if (kind == "star") {
      graphs.push_back(gen_star(item.at("leaves").get<int>()));
    } else if (kind == "clustered") {
      ClusteredSpec cs;
      cs.n = item.value("n", cs.n);
      cs.avg_degree = item.value("avg_degree", cs.avg_degree);
      cs.communities = item.value("communities", cs.communities);
      cs.mixing = item.value("mixing", cs.mixing);
      cs.max_degree = item.value("max_degree", cs.max_degree);
      cs.seed = item.value("seed", seed + serial);
      const auto res = gen_clustered(cs);
      graphs.push_back(res.graph);
      json g = item;
      g["seed"] = cs.seed;
      g["attempts"] = res.attempts;
      g["repaired"] = res.repaired;
      gen.push_back(std::move(g));
      ++serial;
      continue;
    } else {
      detail::fail("unknown graph kind '", kind, "' in spec");
    }
    gen.push_back(item);
    ++serial;
  }
  return detail::assemble(std::move(graphs), std::move(gen), spec.value("name", std::string("spec")), fractions, seed,
                          warnings);
}

struct LayoutOptions {
  Fa2Config fa2;
  PmdsConfig pmds;
  Canvas canvas;
};

inline LayoutOptions layout_options(const Overrides& o) {
  check_keys(o, {"fa2.iterations", "fa2.scaling", "fa2.gravity", "fa2.jitter", "fa2.max_rise", "pmds.pivots",
                 "pmds.iterations", "canvas.width", "canvas.height", "canvas.margin"});
  LayoutOptions opt;
  opt.fa2.iterations = int(get_int(o, "fa2.iterations", opt.fa2.iterations));
  opt.fa2.scaling = get_double(o, "fa2.scaling", opt.fa2.scaling);
  opt.fa2.gravity = get_double(o, "fa2.gravity", opt.fa2.gravity);
  opt.fa2.jitter_tolerance = get_double(o, "fa2.jitter", opt.fa2.jitter_tolerance);
  opt.fa2.max_speed_rise = get_double(o, "fa2.max_rise", opt.fa2.max_speed_rise);
  opt.pmds.pivots = int(get_int(o, "pmds.pivots", opt.pmds.pivots));
  opt.pmds.power_iterations = int(get_int(o, "pmds.iterations", opt.pmds.power_iterations));
  opt.canvas.width = get_double(o, "canvas.width", opt.canvas.width);
  opt.canvas.height = get_double(o, "canvas.height", opt.canvas.height);
  opt.canvas.margin = get_double(o, "canvas.margin", opt.canvas.margin);
  return opt;
}

// Computes a ground-truth layout for every entry. "forceatlas2" always starts
// from PivotMDS.
inline void apply_layout(DrawingDataset& d, const std::string& style, const LayoutOptions& opt,
                         std::vector<std::string>* notes = nullptr) {
  check_style(style);
  if (style == "none" || style == "predicted") detail::fail("style '", style, "' is not a layout engine");
  for (auto& e : d.entries) {
    Diagnostics diag;
    if (style == "grid-perfect") {
      if (!e.gen.contains("rows")) detail::fail("entry ", e.id, " is not a generated grid graph");
      e.layout = layout_grid_perfect(e.gen["rows"].get<int>(), e.gen["cols"].get<int>(), opt.canvas);
    } else if (style == "star-perfect") {
      if (!e.gen.contains("leaves")) detail::fail("entry ", e.id, " is not a generated star graph");
      e.layout = layout_star_perfect(e.gen["leaves"].get<int>(), opt.canvas);
    } else if (style == "pivotmds") {
      e.layout = layout_pivotmds(e.graph, opt.pmds, opt.canvas, &diag);
    } else {
      e.layout = layout_forceatlas2_pivot_init(e.graph, opt.fa2, opt.pmds, opt.canvas, &diag);
    }
    e.style = style;
    if (notes != nullptr) {
      for (auto& msg : diag) notes->push_back(e.id + ": " + msg);
    }
  }
  d.style = style;
  d.canvas = opt.canvas;
  d.metadata["layout"] = {{"style", style},
                          {"fa2", {{"iterations", opt.fa2.iterations},
                                   {"scaling", opt.fa2.scaling},
                                   {"gravity", opt.fa2.gravity},
                                   {"jitter_tolerance", opt.fa2.jitter_tolerance},
                                   {"max_speed_rise", opt.fa2.max_speed_rise}}},
                          {"pmds", {{"pivots", opt.pmds.pivots}, {"power_iterations", opt.pmds.power_iterations}}}};
}

// Predicted drawings (canonical BFS start at node 0) normalized to the canvas.
template <typename T>
DrawingDataset predict_dataset(const DrawingDataset& in, const ModelParams<T>& params) {
  DrawingDataset out = in;
  out.style = "predicted";
  out.metadata["model"] = {{"kind", model_name(params.shape.kind)},
                           {"hidden", params.shape.hidden},
                           {"input", params.shape.input},
                           {"layers", params.shape.layers}};
  for (auto& e : out.entries) {
    e.layout = normalize_to_canvas(predict_layout(params, e.graph, 0), in.canvas);
    e.style = "predicted";
  }
  return out;
}

struct GraphScores {
  std::string id;
  double procrustes = 0.0;
  AestheticValues truth;
  AestheticValues pred;
};

struct MetricReport {
  std::vector<GraphScores> graphs;
  double procrustes_mean = 0.0;
  double rmse_edge_crossing = 0.0;
  double rmse_node_occlusion = 0.0;
  double rmse_community_overlap = 0.0;
  std::vector<double> model_seconds;  // per graph, encode + forward
  std::vector<double> fa2_seconds;    // per graph, 700-step ForceAtlas2
  std::vector<std::string> notes;
};

// Scores predicted drawings against ground truth, matched by entry id.
inline MetricReport compare_datasets(const DrawingDataset& truth, const DrawingDataset& pred,
                                     std::optional<Split> only = std::nullopt, double radius = 8.0) {
  std::map<std::string, const DatasetEntry*> by_id;
  for (const auto& e : pred.entries) by_id[e.id] = &e;
  MetricReport r;
  std::vector<double> ec_t, ec_p, no_t, no_p, co_t, co_p;
  for (const auto& t : truth.entries) {
    if (only && t.split != *only) continue;
    auto it = by_id.find(t.id);
    if (it == by_id.end()) detail::fail("prediction file has no entry '", t.id, "'");
    const auto& p = *it->second;
    if (!t.layout) detail::fail("ground-truth entry ", t.id, " has no coordinates");
    if (!p.layout) detail::fail("predicted entry ", p.id, " has no coordinates");
    if (!(p.graph == t.graph)) detail::fail("entry ", t.id, " differs in graph structure between files");
    GraphScores s;
    s.id = t.id;
    s.procrustes = procrustes_statistic(*p.layout, *t.layout);
    // node size is defined on the 800x800 canvas; compare both on it
    const Canvas canvas = truth.canvas;
    s.truth = aesthetics(t.graph, normalize_to_canvas(*t.layout, canvas), radius);
    s.pred = aesthetics(t.graph, normalize_to_canvas(*p.layout, canvas), radius);
    ec_t.push_back(s.truth.edge_crossing);
    ec_p.push_back(s.pred.edge_crossing);
    no_t.push_back(s.truth.node_occlusion);
    no_p.push_back(s.pred.node_occlusion);
    co_t.push_back(s.truth.community_overlap);
    co_p.push_back(s.pred.community_overlap);
    r.graphs.push_back(std::move(s));
  }
  if (r.graphs.empty()) return r;
  for (const auto& g : r.graphs) r.procrustes_mean += g.procrustes / double(r.graphs.size());
  r.rmse_edge_crossing = rmse(ec_t, ec_p);
  r.rmse_node_occlusion = rmse(no_t, no_p);
  r.rmse_community_overlap = rmse(co_t, co_p);
  if (truth.entries.front().graph.has_communities()) {
    r.notes.emplace_back("community overlap uses a k-nearest-neighbour distance-weighted reconstruction (k=5)");
  }
  return r;
}

inline double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

inline json report_json(const MetricReport& r) {
  json j;
  j["graphs"] = r.graphs.size();
  j["procrustes_mean"] = r.procrustes_mean;
  j["rmse"] = {{"edge_crossing", r.rmse_edge_crossing},
               {"node_occlusion", r.rmse_node_occlusion},
               {"community_overlap", r.rmse_community_overlap}};
  json rows = json::array();
  for (const auto& g : r.graphs) {
    rows.push_back({{"id", g.id},
                    {"procrustes", g.procrustes},
                    {"truth", {g.truth.edge_crossing, g.truth.node_occlusion, g.truth.community_overlap}},
                    {"pred", {g.pred.edge_crossing, g.pred.node_occlusion, g.pred.community_overlap}}});
  }
  j["per_graph"] = std::move(rows);
  j["per_graph_columns"] = {"A_ec", "A_no", "A_co"};
  if (!r.model_seconds.empty()) j["timing"]["model_mean_seconds"] = mean_of(r.model_seconds);
  if (!r.fa2_seconds.empty()) j["timing"]["forceatlas2_mean_seconds"] = mean_of(r.fa2_seconds);
  j["notes"] = r.notes;
  return j;
}

inline std::string report_text(const MetricReport& r) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  os << "graphs                  " << r.graphs.size() << "\n"
     << "procrustes mean         " << r.procrustes_mean << "\n"
     << "RMSE(A_ec)              " << r.rmse_edge_crossing << "\n"
     << "RMSE(A_no)              " << r.rmse_node_occlusion << "\n"
     << "RMSE(A_co)              " << r.rmse_community_overlap << "\n";
  os.precision(6);
  if (!r.model_seconds.empty()) os << "model s/graph           " << mean_of(r.model_seconds) << "\n";
  if (!r.fa2_seconds.empty()) os << "forceatlas2 s/graph     " << mean_of(r.fa2_seconds) << "\n";
  for (const auto& n : r.notes) os << "note: " << n << "\n";
  return os.str();
}

}  // namespace gdraw
