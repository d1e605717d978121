#pragma once

// Dataset files (line-delimited JSON), checkpoints (JSON manifest followed by
// little-endian tensor payload) and SVG rendering.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gdraw/error.hpp"
#include "gdraw/generate.hpp"
#include "gdraw/graph.hpp"
#include "gdraw/layout.hpp"
#include "gdraw/model.hpp"
#include "gdraw/procrustes.hpp"
#include "gdraw/train.hpp"

namespace gdraw {

using json = nlohmann::json;

inline constexpr int kDatasetVersion = 1;
inline constexpr int kCheckpointVersion = 1;

inline const std::vector<std::string>& style_tags() {
  static const std::vector<std::string> tags{"none", "grid-perfect", "star-perfect", "pivotmds", "forceatlas2", "predicted"};
  return tags;
}

inline const std::string& check_style(const std::string& tag) {
  const auto& tags = style_tags();
  if (std::find(tags.begin(), tags.end(), tag) == tags.end()) detail::fail("unknown style tag '", tag, "'");
  return tag;
}

struct DatasetEntry {
  std::string id;
  Graph graph;
  std::optional<Layout> layout;
  std::string style = "none";
  Split split = Split::train;
  json gen = json::object();  // generator provenance
};

struct DrawingDataset {
  int version = kDatasetVersion;
  Canvas canvas;
  std::string style = "none";
  json metadata = json::object();
  std::vector<DatasetEntry> entries;

  std::vector<DrawingExample> examples(Split s) const {
    std::vector<DrawingExample> out;
    for (const auto& e : entries) {
      if (e.split == s && e.layout) out.push_back({e.graph, *e.layout});
    }
    return out;
  }

  friend bool operator==(const DrawingDataset& a, const DrawingDataset& b) {
    if (a.version != b.version || a.style != b.style || a.metadata != b.metadata ||
        a.entries.size() != b.entries.size() || a.canvas.width != b.canvas.width ||
        a.canvas.height != b.canvas.height || a.canvas.margin != b.canvas.margin) {
      return false;
    }
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
      const auto& x = a.entries[i];
      const auto& y = b.entries[i];
      if (x.id != y.id || !(x.graph == y.graph) || x.layout != y.layout || x.style != y.style || x.split != y.split ||
          x.gen != y.gen) {
        return false;
      }
    }
    return true;
  }
};

inline json entry_to_json(const DatasetEntry& e) {
  json j;
  j["id"] = e.id;
  j["n"] = e.graph.size();
  json edges = json::array();
  for (auto [u, v] : e.graph.edges()) edges.push_back({u, v});
  j["edges"] = std::move(edges);
  if (e.graph.has_communities()) j["communities"] = *e.graph.communities();
  if (e.layout) {
    json coords = json::array();
    for (const auto& p : *e.layout) coords.push_back({p.x, p.y});
    j["layout"] = std::move(coords);
  }
  j["style"] = e.style;
  j["split"] = split_name(e.split);
  j["gen"] = e.gen;
  return j;
}

inline DatasetEntry entry_from_json(const json& j) {
  DatasetEntry e;
  e.id = j.at("id").get<std::string>();
  const auto n = j.at("n").get<std::size_t>();
  std::vector<Edge> edges;
  for (const auto& pair : j.at("edges")) {
    if (!pair.is_array() || pair.size() != 2) detail::fail("record ", e.id, ": malformed edge");
    edges.emplace_back(pair[0].get<int>(), pair[1].get<int>());
  }
  std::optional<std::vector<int>> comm;
  if (j.contains("communities")) comm = j.at("communities").get<std::vector<int>>();
  e.graph = Graph(n, std::move(edges), std::move(comm));
  if (j.contains("layout")) {
    Layout l;
    for (const auto& p : j.at("layout")) {
      if (!p.is_array() || p.size() != 2) detail::fail("record ", e.id, ": malformed coordinate");
      l.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    if (l.size() != n) detail::fail("record ", e.id, ": layout has ", l.size(), " points for ", n, " nodes");
    e.layout = std::move(l);
  }
  e.style = check_style(j.value("style", std::string("none")));
  e.split = parse_split(j.value("split", std::string("train")));
  e.gen = j.value("gen", json::object());
  return e;
}

inline void write_dataset(std::ostream& os, const DrawingDataset& d) {
  json header;
  header["format"] = "gdraw-dataset";
  header["version"] = d.version;
  header["canvas"] = {{"width", d.canvas.width}, {"height", d.canvas.height}, {"margin", d.canvas.margin}};
  header["style"] = d.style;
  header["metadata"] = d.metadata;
  os << header.dump() << '\n';
  for (const auto& e : d.entries) os << entry_to_json(e).dump() << '\n';
}

inline DrawingDataset read_dataset(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) detail::fail("dataset file is empty");
  DrawingDataset d;
  try {
    const json header = json::parse(line);
    if (header.value("format", std::string()) != "gdraw-dataset") detail::fail("not a gdraw dataset file");
    d.version = header.at("version").get<int>();
    if (d.version != kDatasetVersion) {
      detail::fail("dataset version ", d.version, " is not supported (expected ", kDatasetVersion, ")");
    }
    const auto& c = header.at("canvas");
    d.canvas = {c.at("width").get<double>(), c.at("height").get<double>(), c.at("margin").get<double>()};
    d.style = check_style(header.value("style", std::string("none")));
    d.metadata = header.value("metadata", json::object());
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        d.entries.push_back(entry_from_json(json::parse(line)));
      } catch (const json::exception& ex) {
        detail::fail("dataset line ", lineno, ": ", ex.what());
      }
    }
  } catch (const json::exception& ex) {
    detail::fail("dataset header: ", ex.what());
  }
  return d;
}

inline void save_dataset(const std::string& path, const DrawingDataset& d) {
  std::ofstream os(path);
  if (!os) detail::fail("cannot write ", path);
  write_dataset(os, d);
  if (!os) detail::fail("write to ", path, " failed");
}

inline DrawingDataset load_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) detail::fail("cannot open ", path);
  return read_dataset(is);
}

// ---- checkpoints ------------------------------------------------------------------

template <typename T>
constexpr const char* dtype_name() {
  if constexpr (std::is_same_v<T, float>) {
    return "f32";
  } else {
    static_assert(std::is_same_v<T, double>, "checkpoints store f32 or f64");
    return "f64";
  }
}

template <typename T>
struct Checkpoint {
  ModelParams<T> params;
  std::optional<AdamState<T>> optimizer;
  int epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();
  json config = json::object();
  int version = kCheckpointVersion;
};

namespace detail {

inline constexpr const char* kCheckpointMagic = "GDRAW-CHECKPOINT";

template <typename T>
void put_le(std::ostream& os, const std::vector<T>& v) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * sizeof(T)));
  } else {
    for (T x : v) {
      char b[sizeof(T)];
      std::memcpy(b, &x, sizeof(T));
      std::reverse(b, b + sizeof(T));
      os.write(b, sizeof(T));
    }
  }
}

template <typename T>
void get_le(std::istream& is, std::vector<T>& v, const std::string& name) {
  is.read(reinterpret_cast<char*>(v.data()), std::streamsize(v.size() * sizeof(T)));
  if (!is || std::size_t(is.gcount()) != v.size() * sizeof(T)) fail("truncated checkpoint: tensor ", name, " incomplete");
  if constexpr (std::endian::native != std::endian::little) {
    for (auto& x : v) {
      char b[sizeof(T)];
      std::memcpy(b, &x, sizeof(T));
      std::reverse(b, b + sizeof(T));
      std::memcpy(&x, b, sizeof(T));
    }
  }
}

}  // namespace detail

template <typename T>
void write_checkpoint(std::ostream& os, const Checkpoint<T>& ck) {
  const auto& p = ck.params;
  json manifest;
  manifest["version"] = ck.version;
  manifest["dtype"] = dtype_name<T>();
  manifest["model"] = model_name(p.shape.kind);
  manifest["hidden"] = p.shape.hidden;
  manifest["input"] = p.shape.input;
  manifest["layers"] = p.shape.layers;
  manifest["epoch"] = ck.epoch;
  manifest["best_val"] = std::isfinite(ck.best_val) ? json(ck.best_val) : json(nullptr);
  manifest["config"] = ck.config;
  json tensors = json::array();
  std::size_t offset = 0;
  for (const auto& t : p.tensors) {
    tensors.push_back({{"name", t.name}, {"shape", {t.shape.rows, t.shape.cols}}, {"offset", offset}, {"count", t.data.size()}});
    offset += t.data.size() * sizeof(T);
  }
  manifest["tensors"] = std::move(tensors);
  const std::size_t block = offset;
  if (ck.optimizer) {
    manifest["optimizer"] = {{"step", ck.optimizer->step}, {"skipped", ck.optimizer->skipped}, {"moments", true}};
    offset += 2 * block;
  }
  manifest["payload_bytes"] = offset;
  os << detail::kCheckpointMagic << '\n' << manifest.dump() << '\n';
  for (const auto& t : p.tensors) detail::put_le(os, t.data);
  if (ck.optimizer) {
    for (const auto& t : ck.optimizer->m.tensors) detail::put_le(os, t.data);
    for (const auto& t : ck.optimizer->v.tensors) detail::put_le(os, t.data);
  }
  if (!os) detail::fail("checkpoint write failed");
}

template <typename T>
Checkpoint<T> read_checkpoint(std::istream& is) {
  std::string magic, line;
  if (!std::getline(is, magic) || magic != detail::kCheckpointMagic) detail::fail("not a gdraw checkpoint");
  if (!std::getline(is, line)) detail::fail("truncated checkpoint: missing manifest");
  json manifest;
  try {
    manifest = json::parse(line);
  } catch (const json::exception&) {
    detail::fail("truncated checkpoint: unreadable manifest");
  }
  Checkpoint<T> ck;
  try {
    ck.version = manifest.at("version").get<int>();
    if (ck.version != kCheckpointVersion) {
      detail::fail("checkpoint version ", ck.version, " is not supported (expected ", kCheckpointVersion, ")");
    }
    const auto dtype = manifest.at("dtype").get<std::string>();
    if (dtype != dtype_name<T>()) detail::fail("checkpoint holds ", dtype, " tensors, expected ", dtype_name<T>());
    ModelShape shape{parse_model(manifest.at("model").get<std::string>()), manifest.at("hidden").get<std::size_t>(),
                     manifest.at("input").get<std::size_t>(), manifest.at("layers").get<std::size_t>()};
    ck.params = zero_params<T>(shape);
    ck.epoch = manifest.value("epoch", 0);
    if (manifest.contains("best_val") && manifest["best_val"].is_number()) ck.best_val = manifest["best_val"].get<double>();
    ck.config = manifest.value("config", json::object());
    const auto& tensors = manifest.at("tensors");
    if (tensors.size() != ck.params.tensors.size()) detail::fail("checkpoint tensor list does not match model shape");
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      auto& t = ck.params.tensors[i];
      if (tensors[i].at("name").get<std::string>() != t.name || tensors[i].at("count").get<std::size_t>() != t.data.size()) {
        detail::fail("checkpoint tensor ", i, " does not match expected ", t.name);
      }
    }
  } catch (const json::exception& ex) {
    detail::fail("checkpoint manifest: ", ex.what());
  }
  for (auto& t : ck.params.tensors) detail::get_le(is, t.data, t.name);
  if (manifest.contains("optimizer")) {
    AdamState<T> st = AdamState<T>::for_params(ck.params);
    st.step = manifest["optimizer"].value("step", std::uint64_t{0});
    st.skipped = manifest["optimizer"].value("skipped", std::uint64_t{0});
    for (auto& t : st.m.tensors) detail::get_le(is, t.data, t.name + " (first moment)");
    for (auto& t : st.v.tensors) detail::get_le(is, t.data, t.name + " (second moment)");
    ck.optimizer = std::move(st);
  }
  return ck;
}

template <typename T>
void save_checkpoint(const std::string& path, const Checkpoint<T>& ck) {
  std::ofstream os(path, std::ios::binary);
  if (!os) detail::fail("cannot write ", path);
  write_checkpoint(os, ck);
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) detail::fail("cannot open ", path);
  return read_checkpoint<T>(is);
}

// Reads only the manifest (dtype, model shape) of a checkpoint file.
inline json peek_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) detail::fail("cannot open ", path);
  std::string magic, line;
  if (!std::getline(is, magic) || magic != detail::kCheckpointMagic) detail::fail("not a gdraw checkpoint");
  if (!std::getline(is, line)) detail::fail("truncated checkpoint: missing manifest");
  try {
    return json::parse(line);
  } catch (const json::exception&) {
    detail::fail("truncated checkpoint: unreadable manifest");
  }
}

// ---- SVG ------------------------------------------------------------------------------

inline const std::vector<std::string>& community_palette() {
  static const std::vector<std::string> colors{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
                                               "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939"};
  return colors;
}

struct SvgOptions {
  Canvas canvas;
  double node_radius = 8.0;
  std::string title;
};

namespace detail {

inline void svg_drawing(std::ostream& os, const Graph& g, const Layout& l, double dx, const SvgOptions& opt,
                        const char* edge_color) {
  os << std::setprecision(10);
  for (auto [u, v] : g.edges()) {
    os << "<line x1=\"" << l[u].x + dx << "\" y1=\"" << l[u].y << "\" x2=\"" << l[v].x + dx << "\" y2=\"" << l[v].y
       << "\" stroke=\"" << edge_color << "\" stroke-width=\"1.5\"/>\n";
  }
  const auto& palette = community_palette();
  for (std::size_t v = 0; v < g.size(); ++v) {
    const std::string fill = g.has_communities() ? palette[std::size_t((*g.communities())[v]) % palette.size()] : palette[0];
    os << "<circle cx=\"" << l[v].x + dx << "\" cy=\"" << l[v].y << "\" r=\"" << opt.node_radius << "\" fill=\"" << fill
       << "\" stroke=\"#222222\" stroke-width=\"0.5\"/>\n";
  }
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

// One drawing, fitted into the viewport.
inline std::string render_svg(const Graph& g, const Layout& l, const SvgOptions& opt = {}) {
  if (l.size() != g.size()) detail::fail("layout has ", l.size(), " points for ", g.size(), " nodes");
  const auto fitted = normalize_to_canvas(l, opt.canvas);
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.canvas.width << "\" height=\"" << opt.canvas.height
     << "\" viewBox=\"0 0 " << opt.canvas.width << " " << opt.canvas.height << "\">\n";
  if (!opt.title.empty()) os << "<title>" << detail::xml_escape(opt.title) << "</title>\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  detail::svg_drawing(os, g, fitted, 0.0, opt, "#999999");
  os << "</svg>\n";
  return os.str();
}

// Ground truth (left) and prediction aligned onto it by Procrustes (right).
inline std::string render_svg_pair(const Graph& g, const Layout& truth, const Layout& pred, const SvgOptions& opt = {}) {
  if (truth.size() != g.size() || pred.size() != g.size()) detail::fail("layout size does not match graph");
  // one shared canvas transform keeps both panels inside the viewport
  Layout both = truth;
  const auto aligned_raw = procrustes_align(pred, truth).aligned;
  both.insert(both.end(), aligned_raw.begin(), aligned_raw.end());
  both = normalize_to_canvas(both, opt.canvas);
  const Layout gt(both.begin(), both.begin() + std::ptrdiff_t(g.size()));
  const Layout aligned(both.begin() + std::ptrdiff_t(g.size()), both.end());
  std::ostringstream os;
  const double w = opt.canvas.width;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 2 * w << "\" height=\"" << opt.canvas.height
     << "\" viewBox=\"0 0 " << 2 * w << " " << opt.canvas.height << "\">\n";
  if (!opt.title.empty()) os << "<title>" << detail::xml_escape(opt.title) << "</title>\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  detail::svg_drawing(os, g, gt, 0.0, opt, "#999999");
  detail::svg_drawing(os, g, aligned, w, opt, "#999999");
  os << "</svg>\n";
  return os.str();
}

}  // namespace gdraw
