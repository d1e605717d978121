// gdraw: generate graphs, compute ground-truth drawings, train and apply
// drawing models, score and render the results.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "gdraw/gdraw.hpp"

namespace fs = std::filesystem;
using namespace gdraw;

namespace {

struct GenArgs {
  std::string preset, spec, out;
  std::uint64_t seed = 1;
  std::vector<std::string> config;
};

struct LayoutArgs {
  std::string in, out, style;
  std::vector<std::string> config;
};

struct TrainArgs {
  std::string in, out, log, model = "ours", precision = "f32", resume;
  std::size_t k = 35, hidden = 256, batch = 128;
  int epochs = 350;
  std::uint64_t seed = 1;
  std::vector<std::string> config;
};

struct DrawArgs {
  std::string checkpoint, in, out;
};

struct EvalArgs {
  std::string truth, pred, out, split = "test", checkpoint;
  int repeats = 3;
};

struct RenderArgs {
  std::string in, pred, out, split = "all";
  std::size_t limit = 0;
};

std::optional<Split> split_filter(const std::string& s) {
  if (s == "all") return std::nullopt;
  return parse_split(s);
}

void print_warnings(const std::vector<std::string>& w) {
  for (const auto& msg : w) std::cerr << "warning: " << msg << "\n";
}

void run_gen(const GenArgs& a) {
  if (a.preset.empty() == a.spec.empty()) detail::fail("gen needs exactly one of --preset or --spec");
  std::vector<std::string> warnings;
  DrawingDataset d;
  if (!a.preset.empty()) {
    d = generate_preset(a.preset, a.seed, parse_overrides(a.config), &warnings);
  } else {
    std::ifstream is(a.spec);
    if (!is) detail::fail("cannot open ", a.spec);
    json spec;
    try {
      spec = json::parse(is);
    } catch (const json::exception& e) {
      detail::fail("spec file is not valid JSON: ", e.what());
    }
    d = generate_from_spec(spec, a.seed, &warnings);
  }
  print_warnings(warnings);
  save_dataset(a.out, d);
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& e : d.entries) ++counts[int(e.split)];
  std::cout << "wrote " << d.entries.size() << " graphs (train " << counts[0] << ", val " << counts[1] << ", test "
            << counts[2] << ") to " << a.out << "\n";
}

void run_layout(const LayoutArgs& a) {
  auto d = load_dataset(a.in);
  std::vector<std::string> notes;
  apply_layout(d, a.style, layout_options(parse_overrides(a.config)), &notes);
  print_warnings(notes);
  save_dataset(a.out, d);
  std::cout << "laid out " << d.entries.size() << " graphs with " << a.style << " -> " << a.out << "\n";
}

template <typename T>
void train_typed(const TrainArgs& a, const Overrides& o) {
  const auto data = load_dataset(a.in);
  const auto train = data.examples(Split::train);
  const auto val = data.examples(Split::val);
  if (train.empty()) detail::fail("dataset has no training entries with coordinates");

  TrainConfig cfg;
  cfg.learning_rate = get_double(o, "lr", cfg.learning_rate);
  cfg.patience = int(get_int(o, "patience", cfg.patience));
  cfg.batch_size = a.batch;
  cfg.max_epochs = a.epochs;
  cfg.seed = a.seed;

  ModelShape shape{parse_model(a.model), a.hidden, a.k, 1};
  if (shape.kind == ModelKind::baseline) shape.layers = std::size_t(get_int(o, "layers", 4));
  for (const auto& ex : train) {
    const auto w = bfs_width_bound(ex.graph, bfs_order(ex.graph, 0));
    if (w > a.k) {
      std::cerr << "warning: a training graph has BFS level width " << w << " > k=" << a.k
                << "; back-edges beyond k are dropped\n";
      break;
    }
  }

  Trainer<T> trainer(init_params<T>(shape, a.seed), cfg);
  if (!a.resume.empty()) {
    auto ck = load_checkpoint<T>(a.resume);
    if (ck.params.shape.kind != shape.kind || ck.params.shape.hidden != shape.hidden ||
        ck.params.shape.input != shape.input || ck.params.shape.layers != shape.layers) {
      detail::fail("checkpoint ", a.resume, " has a different model shape");
    }
    trainer.params() = std::move(ck.params);
    if (ck.optimizer) trainer.optimizer() = std::move(*ck.optimizer);
    trainer.set_epoch(ck.epoch);
  }

  const std::string log_path = a.log.empty() ? a.out + ".log.jsonl" : a.log;
  std::ofstream log(log_path);
  if (!log) detail::fail("cannot write ", log_path);
  if (get_int(o, "log_batches", 0) != 0) {
    trainer.set_batch_log([&](const BatchRecord& r) {
      log << json{{"type", "batch"}, {"epoch", r.epoch}, {"batch", r.batch}, {"loss", r.loss}, {"wall", r.wall_seconds}}.dump()
          << "\n";
    });
  }
  json config = {{"lr", cfg.learning_rate}, {"batch", cfg.batch_size}, {"epochs", cfg.max_epochs},
                 {"patience", cfg.patience}, {"seed", cfg.seed},      {"dataset", a.in},
                 {"precision", a.precision}};
  log << json{{"type", "start"}, {"model", a.model}, {"params", param_count(shape)}, {"config", config}}.dump() << "\n";
  std::cout << a.model << ": " << param_count(shape) << " parameters, " << train.size() << " training graphs\n";

  const auto report = fit(trainer, std::span<const DrawingExample>(train), std::span<const DrawingExample>(val),
                          [&](const EpochStats& s, double v) {
                            log << json{{"type", "epoch"},       {"epoch", s.epoch},
                                        {"train_loss", s.mean_loss}, {"val_mean", std::isnan(v) ? json(nullptr) : json(v)},
                                        {"seconds", s.seconds},      {"skipped_entries", s.skipped_entries},
                                        {"skipped_updates", s.skipped_updates}}
                                       .dump()
                                << "\n";
                            log.flush();
                            std::cout << "epoch " << s.epoch << " train " << s.mean_loss << " val " << v << " ("
                                      << s.seconds << " s)\n";
                          });
  Checkpoint<T> ck;
  ck.params = trainer.params();
  ck.optimizer = trainer.optimizer();
  ck.epoch = trainer.epoch();
  ck.best_val = report.best_val;
  ck.config = config;
  save_checkpoint(a.out, ck);
  log << json{{"type", "end"}, {"best_epoch", report.best_epoch}, {"best_val", report.best_val},
              {"early_stopped", report.early_stopped}}
             .dump()
      << "\n";
  std::cout << "saved checkpoint " << a.out << " (best val " << report.best_val << " at epoch " << report.best_epoch
            << ")\n";
}

void run_train(const TrainArgs& a) {
  const auto o = parse_overrides(a.config);
  check_keys(o, {"lr", "patience", "layers", "log_batches"});
  if (a.precision == "f32") {
    train_typed<float>(a, o);
  } else if (a.precision == "f64") {
    train_typed<double>(a, o);
  } else {
    detail::fail("precision must be f32 or f64");
  }
}

template <typename T>
DrawingDataset draw_typed(const std::string& checkpoint, const DrawingDataset& in) {
  return predict_dataset(in, load_checkpoint<T>(checkpoint).params);
}

DrawingDataset draw_with(const std::string& checkpoint, const DrawingDataset& in) {
  const auto manifest = peek_checkpoint(checkpoint);
  const auto dtype = manifest.value("dtype", std::string());
  if (dtype == "f32") return draw_typed<float>(checkpoint, in);
  if (dtype == "f64") return draw_typed<double>(checkpoint, in);
  detail::fail("checkpoint has unknown dtype '", dtype, "'");
}

void run_draw(const DrawArgs& a) {
  const auto out = draw_with(a.checkpoint, load_dataset(a.in));
  save_dataset(a.out, out);
  std::cout << "drew " << out.entries.size() << " graphs -> " << a.out << "\n";
}

template <typename T>
std::vector<double> time_model(const std::string& checkpoint, std::span<const Graph> graphs, int repeats) {
  const auto params = load_checkpoint<T>(checkpoint).params;
  return time_layout([&](const Graph& g) { (void)predict_layout(params, g, 0); }, graphs, repeats);
}

void run_eval(const EvalArgs& a) {
  const auto truth = load_dataset(a.truth);
  const auto pred = load_dataset(a.pred);
  auto report = compare_datasets(truth, pred, split_filter(a.split));
  if (report.graphs.empty()) detail::fail("no entries in split '", a.split, "'");
  if (!a.checkpoint.empty()) {
    std::vector<Graph> graphs;
    const auto only = split_filter(a.split);
    for (const auto& e : truth.entries) {
      if (!only || e.split == *only) graphs.push_back(e.graph);
    }
    const auto dtype = peek_checkpoint(a.checkpoint).value("dtype", std::string());
    report.model_seconds = dtype == "f64" ? time_model<double>(a.checkpoint, graphs, a.repeats)
                                          : time_model<float>(a.checkpoint, graphs, a.repeats);
    report.fa2_seconds = time_layout(
        [](const Graph& g) { (void)layout_forceatlas2_pivot_init(g, Fa2Config{}, PmdsConfig{}, Canvas{}); }, graphs,
        a.repeats);
  }
  std::cout << report_text(report);
  if (!a.out.empty()) {
    std::ofstream os(a.out);
    if (!os) detail::fail("cannot write ", a.out);
    os << report_json(report).dump(2) << "\n";
  }
}

void run_render(const RenderArgs& a) {
  const auto d = load_dataset(a.in);
  std::optional<DrawingDataset> pred;
  std::map<std::string, const DatasetEntry*> by_id;
  if (!a.pred.empty()) {
    pred = load_dataset(a.pred);
    for (const auto& e : pred->entries) by_id[e.id] = &e;
  }
  fs::create_directories(a.out);
  const auto only = split_filter(a.split);
  std::size_t written = 0;
  for (const auto& e : d.entries) {
    if (only && e.split != *only) continue;
    if (a.limit != 0 && written >= a.limit) break;
    if (!e.layout) detail::fail("entry ", e.id, " has no coordinates to render");
    SvgOptions opt;
    opt.canvas = d.canvas;
    opt.title = e.id + " (" + e.style + ")";
    std::string svg;
    if (pred) {
      auto it = by_id.find(e.id);
      if (it == by_id.end() || !it->second->layout) detail::fail("prediction file has no coordinates for ", e.id);
      svg = render_svg_pair(e.graph, *e.layout, *it->second->layout, opt);
    } else {
      svg = render_svg(e.graph, *e.layout, opt);
    }
    std::ofstream os(fs::path(a.out) / (e.id + ".svg"));
    if (!os) detail::fail("cannot write into ", a.out);
    os << svg;
    ++written;
  }
  std::cout << "wrote " << written << " SVG files to " << a.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gdraw: learn and reproduce graph drawing styles"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "generate a graph dataset");
  g->add_option("--preset", gen.preset, "grid | star | clustered | clustered-desk");
  g->add_option("--spec", gen.spec, "JSON file listing graphs to generate");
  g->add_option("--seed", gen.seed, "random seed");
  g->add_option("--config", gen.config, "key=value overrides");
  g->add_option("--out", gen.out, "output dataset")->required();

  LayoutArgs lay;
  auto* l = app.add_subcommand("layout", "compute ground-truth drawings");
  l->add_option("--in", lay.in, "input dataset")->required();
  l->add_option("--style", lay.style, "grid-perfect | star-perfect | pivotmds | forceatlas2")->required();
  l->add_option("--config", lay.config, "key=value overrides");
  l->add_option("--out", lay.out, "output dataset")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a drawing model");
  t->add_option("--in", tr.in, "dataset with ground-truth drawings")->required();
  t->add_option("--model", tr.model, "ours | baseline")->check(CLI::IsMember({"ours", "baseline"}));
  t->add_option("--k", tr.k, "adjacency vector length");
  t->add_option("--hidden", tr.hidden, "hidden units per direction");
  t->add_option("--epochs", tr.epochs, "maximum epochs");
  t->add_option("--batch", tr.batch, "batch size");
  t->add_option("--seed", tr.seed, "random seed");
  t->add_option("--precision", tr.precision, "f32 | f64");
  t->add_option("--resume", tr.resume, "continue from a checkpoint");
  t->add_option("--config", tr.config, "key=value overrides (lr, patience, layers, log_batches)");
  t->add_option("--log", tr.log, "JSON-lines training log");
  t->add_option("--out", tr.out, "output checkpoint")->required();

  DrawArgs dr;
  auto* d = app.add_subcommand("draw", "predict drawings with a trained model");
  d->add_option("--checkpoint", dr.checkpoint, "trained checkpoint")->required();
  d->add_option("--in", dr.in, "input dataset")->required();
  d->add_option("--out", dr.out, "output dataset")->required();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "score predicted drawings against ground truth");
  e->add_option("--truth", ev.truth, "ground-truth dataset")->required();
  e->add_option("--pred", ev.pred, "predicted dataset")->required();
  e->add_option("--split", ev.split, "train | val | test | all");
  e->add_option("--checkpoint", ev.checkpoint, "also time the model against ForceAtlas2");
  e->add_option("--repeats", ev.repeats, "timing repeats per graph");
  e->add_option("--out", ev.out, "JSON report");

  RenderArgs rn;
  auto* r = app.add_subcommand("render", "write one SVG per graph");
  r->add_option("--in", rn.in, "dataset with coordinates")->required();
  r->add_option("--pred", rn.pred, "predicted dataset for side-by-side panels");
  r->add_option("--split", rn.split, "train | val | test | all");
  r->add_option("--limit", rn.limit, "maximum number of files");
  r->add_option("--out", rn.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }

  try {
    if (*g) run_gen(gen);
    if (*l) run_layout(lay);
    if (*t) run_train(tr);
    if (*d) run_draw(dr);
    if (*e) run_eval(ev);
    if (*r) run_render(rn);
  } catch (const std::exception& ex) {
    std::string msg = ex.what();
    for (auto& c : msg) {
      if (c == '\n') c = ' ';
    }
    std::cerr << "gdraw: error: " << msg << "\n";
    return 1;
  }
  return 0;
}
