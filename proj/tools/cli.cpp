#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>

#include "ilse/cayley_graph.hpp"
#include "ilse/errors.hpp"
#include "ilse/lrep.hpp"
#include "ilse/report.hpp"
#include "ilse/synthetic.hpp"
#include "ilse/training.hpp"

namespace ilse::cli {
namespace {

using nlohmann::json;

// Flags shared by every subcommand.
struct Common {
  std::uint64_t seed = 0;
  bool json_output = false;
  std::string out_path;
  std::string config_path;
  std::size_t jobs = 1;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Root seed (falls back to $ILSE_SEED, then 0)");
  sub->add_flag("--json", c.json_output, "Emit JSON instead of text");
  sub->add_option("--out", c.out_path, "Write the result to this file instead of stdout");
  sub->add_option("--config", c.config_path, "JSON file of flag values; explicit flags win");
  sub->add_option("--jobs", c.jobs, "Worker threads for independent runs")->check(CLI::PositiveNumber);
}

std::vector<std::string> config_values(const std::string& key, const json& value) {
  std::vector<std::string> values;
  auto scalar = [&](const json& v) {
    if (v.is_string()) {
      values.push_back(v.get<std::string>());
    } else if (v.is_boolean()) {
      values.push_back(v.get<bool>() ? "true" : "false");
    } else if (v.is_number()) {
      values.push_back(v.dump());
    } else {
      throw InvalidArgument("config: unsupported value for '" + key + "'");
    }
  };
  if (value.is_array()) {
    for (const json& v : value) scalar(v);
  } else {
    scalar(value);
  }
  return values;
}

// Config entries fill options the command line left unset.
void apply_config(CLI::App* sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  if (!cfg.is_object()) throw InvalidArgument("config: top level must be an object");
  for (const auto& [key, value] : cfg.items()) {
    if (key == "config") throw InvalidArgument("config: nested config files are not supported");
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr) throw InvalidArgument("config: unknown key '" + key + "'");
    if (opt->count() > 0) continue;
    for (const std::string& v : config_values(key, value)) opt->add_result(v);
    opt->run_callback();
  }
}

void resolve_seed(CLI::App* active, Common& c) {
  if (active->get_option("--seed")->count() > 0) return;
  const char* env = std::getenv("ILSE_SEED");
  if (env == nullptr || *env == '\0') return;
  try {
    std::size_t used = 0;
    const std::string text(env);
    if (text.front() == '-') throw std::invalid_argument("negative");
    c.seed = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw InvalidArgument(std::string("ILSE_SEED is not an unsigned integer: ") + env);
  }
}

void emit(const Common& c, std::ostream& out, const std::string& text) {
  if (c.out_path.empty()) {
    out << text;
    return;
  }
  std::ofstream file(c.out_path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot open output file: " + c.out_path);
  file << text;
  if (!file) throw IoError("write failed: " + c.out_path);
}

std::string json_text(const json& j) { return j.dump(2) + "\n"; }

TaskDataset load_dataset(const std::string& path) {
  if (path.empty()) throw InvalidArgument("--data is required");
  return read_lrep(std::filesystem::path(path));
}

// ---- cayley ---------------------------------------------------------------

struct CayleyArgs {
  std::uint64_t n = 0;
  std::uint64_t layers = 0;
  std::string edges_path;
  CLI::Option* n_option = nullptr;
  CLI::Option* layers_option = nullptr;
};

int cmd_cayley(const CayleyArgs& a, const Common& c, std::ostream& out) {
  const bool has_n = a.n_option->count() > 0;
  const bool has_layers = a.layers_option->count() > 0;
  if (has_n == has_layers) throw InvalidArgument("cayley: give exactly one of --n and --layers");
  std::uint64_t n = a.n;
  if (has_layers) {
    if (a.layers == 0) throw InvalidArgument("cayley: --layers must be at least 1");
    n = smallest_n_for(a.layers).n;
  }
  if (n < 2) throw InvalidArgument("cayley: --n must be at least 2");
  if (n > 64) throw InvalidArgument("cayley: --n above 64 is not supported");

  const CayleyGraph cg = build_cayley(static_cast<std::int64_t>(n));
  const Graph& g = cg.graph();
  std::optional<std::size_t> diameter;
  if (n <= 12) diameter = graph_diameter(g);

  if (!a.edges_path.empty()) {
    std::ofstream file(a.edges_path, std::ios::trunc);
    if (!file) throw IoError("cannot open edge-list file: " + a.edges_path);
    g.write_edge_list(file);
    if (!file) throw IoError("write failed: " + a.edges_path);
  }

  json j;
  j["n"] = n;
  j["nodes"] = g.node_count();
  if (has_layers) {
    j["layers"] = a.layers;
    j["virtual"] = g.node_count() - a.layers;
  }
  json hist = json::object();
  for (const auto& [degree, count] : g.degree_histogram()) hist[std::to_string(degree)] = count;
  j["degree_histogram"] = hist;
  j["edges"] = g.edge_count();
  j["connected"] = g.is_connected();
  j["diameter"] = diameter ? json(*diameter) : json(nullptr);

  if (c.json_output) {
    emit(c, out, json_text(j));
    return kOk;
  }
  std::ostringstream s;
  s << "n          " << n << "\n";
  s << "nodes      " << g.node_count() << "\n";
  if (has_layers) {
    s << "layers     " << a.layers << "\n";
    s << "virtual    " << g.node_count() - a.layers << "\n";
  }
  s << "degrees   ";
  for (const auto& [degree, count] : g.degree_histogram()) s << " " << degree << ":" << count;
  s << "\n";
  s << "edges      " << g.edge_count() << "\n";
  s << "connected  " << (g.is_connected() ? "yes" : "no") << "\n";
  s << "diameter   " << (diameter ? std::to_string(*diameter) : std::string("n/a (n > 12)")) << "\n";
  emit(c, out, s.str());
  return kOk;
}

// ---- gen-synth ------------------------------------------------------------

struct SynthArgs {
  SynthSpec spec;
  std::string task = "classification";
};

int cmd_gen_synth(SynthArgs& a, const Common& c, std::ostream& out) {
  if (c.out_path.empty()) throw InvalidArgument("gen-synth: --out is required");
  if (a.task == "classification") {
    a.spec.kind = TaskKind::kClassification;
  } else if (a.task == "pair" || a.task == "pair_regression") {
    a.spec.kind = TaskKind::kPairRegression;
  } else {
    throw InvalidArgument("gen-synth: --task must be classification or pair");
  }
  a.spec.seed = c.seed;
  a.spec.validate();
  const TaskDataset ds = generate_synthetic(a.spec);
  write_lrep(std::filesystem::path(c.out_path), ds);

  json j;
  j["path"] = c.out_path;
  j["task"] = to_string(ds.kind);
  j["examples"] = ds.examples.size();
  j["layers"] = ds.layers;
  j["width"] = ds.width;
  j["classes"] = ds.classes;
  j["planted_layer"] = a.spec.planted_layer;
  j["splits"] = {{"train", ds.count(Split::kTrain)},
                 {"validation", ds.count(Split::kValidation)},
                 {"test", ds.count(Split::kTest)}};
  if (c.json_output) {
    out << json_text(j);
  } else {
    out << "wrote " << c.out_path << ": N=" << ds.examples.size() << " L=" << ds.layers << " d=" << ds.width
        << " K=" << ds.classes << " planted=" << a.spec.planted_layer << " splits=" << ds.count(Split::kTrain) << "/"
        << ds.count(Split::kValidation) << "/" << ds.count(Split::kTest) << "\n";
  }
  return kOk;
}

// ---- training flags -------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string method = "cayley-gin";
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double dropout = 0.0;
  int mpnn_layers = 1;
  int gin_depth = 1;
  std::size_t batch_size = 0;
  std::size_t max_epochs = 50;
  std::size_t patience = 10;
  std::optional<std::size_t> layer;
  std::string checkpoint;
  bool include_wall_time = false;
};

void add_train_flags(CLI::App* sub, TrainArgs& t, bool with_method) {
  sub->add_option("--data", t.data, "LREP dataset file");
  if (with_method) sub->add_option("--method", t.method, "Encoder or baseline name");
  sub->add_option("--lr", t.lr, "Adam learning rate");
  sub->add_option("--weight-decay", t.weight_decay, "Decoupled weight decay");
  sub->add_option("--dropout", t.dropout, "Dropout rate in [0, 0.3]");
  sub->add_option("--mpnn-layers", t.mpnn_layers, "Message-passing layers (1 or 2)");
  sub->add_option("--gin-depth", t.gin_depth, "Hidden layers in each GIN MLP (0 to 2)");
  sub->add_option("--batch-size", t.batch_size, "Mini-batch size; 0 picks the task default");
  sub->add_option("--max-epochs", t.max_epochs, "Epoch budget");
  sub->add_option("--patience", t.patience, "Early-stopping patience in epochs");
  sub->add_flag("--include-wall-time", t.include_wall_time, "Report measured wall time in JSON");
}

MethodConfig method_config(const TrainArgs& t, const std::string& name) {
  MethodConfig m = parse_method(name);
  m.dropout = t.dropout;
  m.mpnn_layers = t.mpnn_layers;
  m.gin_mlp_depth = t.gin_depth;
  if (t.layer) m.selected_layer = *t.layer;
  return m;
}

TrainConfig train_config(const TrainArgs& t, const Common& c, const std::string& name) {
  TrainConfig cfg;
  cfg.method = method_config(t, name);
  cfg.lr = t.lr;
  cfg.weight_decay = t.weight_decay;
  cfg.batch_size = t.batch_size;
  cfg.max_epochs = t.max_epochs;
  cfg.patience = t.patience;
  cfg.seed = c.seed;
  if (!t.checkpoint.empty()) cfg.checkpoint_path = t.checkpoint;
  cfg.method.validate();
  cfg.validate();
  return cfg;
}

bool needs_layer(const MethodConfig& m) {
  return (m.method == Method::kBestLayer || m.method == Method::kMlpBest) && !m.selected_layer;
}

// ---- train ----------------------------------------------------------------

int cmd_train(const TrainArgs& t, const Common& c, std::ostream& out) {
  TrainConfig cfg = train_config(t, c, t.method);
  const TaskDataset ds = load_dataset(t.data);
  std::optional<LayerSweep> sweep;
  if (needs_layer(cfg.method)) {
    TrainConfig probe = cfg;
    probe.checkpoint_path.reset();
    sweep = layer_sweep(ds, probe);
    cfg.method.selected_layer = sweep->best_layer;
  }
  const TrainResult result = train(ds, cfg);
  const RunMetrics& m = result.metrics;
  const JsonOptions opts{t.include_wall_time};

  if (c.json_output) {
    json j = to_json(m, opts);
    if (sweep) j["sweep"] = to_json(*sweep);
    emit(c, out, json_text(j));
  } else {
    std::ostringstream s;
    s << "method      " << m.method << "\n";
    s << "params      " << m.params << " (+" << m.head_params << " head)\n";
    s << "epochs      " << m.epochs.size() << " (best " << m.best_epoch << ")\n";
    if (m.ok()) {
      s << "val_best    " << m.val_best << "\n";
      s << "test        " << m.test << "\n";
      if (m.test_pearson) s << "pearson     " << *m.test_pearson << "\n";
      if (m.near_chance) s << "warning     validation stayed near chance\n";
    } else {
      s << "failure     " << m.failure << "\n";
    }
    emit(c, out, s.str());
  }
  return m.ok() ? kOk : kNumericFailure;
}

// ---- compare --------------------------------------------------------------

struct GridArgs {
  std::vector<double> lrs;
  std::vector<double> weight_decays;
  std::vector<double> dropouts;
  std::vector<int> mpnn_layers;
  std::vector<int> gin_depths;
};

void add_grid_flags(CLI::App* sub, GridArgs& g) {
  sub->add_option("--lr-grid", g.lrs, "Learning rates to search")->delimiter(',');
  sub->add_option("--weight-decay-grid", g.weight_decays, "Weight decays to search")->delimiter(',');
  sub->add_option("--dropout-grid", g.dropouts, "Dropout rates to search")->delimiter(',');
  sub->add_option("--mpnn-layers-grid", g.mpnn_layers, "Message-passing depths to search")->delimiter(',');
  sub->add_option("--gin-depth-grid", g.gin_depths, "GIN MLP depths to search")->delimiter(',');
}

Grid make_grid(const GridArgs& g, const TrainConfig& base) {
  Grid grid;
  grid.lrs = g.lrs.empty() ? std::vector<double>{base.lr} : g.lrs;
  grid.weight_decays = g.weight_decays.empty() ? std::vector<double>{base.weight_decay} : g.weight_decays;
  grid.dropouts = g.dropouts.empty() ? std::vector<double>{base.method.dropout} : g.dropouts;
  grid.mpnn_layers = g.mpnn_layers;
  grid.gin_mlp_depths = g.gin_depths;
  return grid;
}

const std::vector<std::string> kAllMethods = {"last_layer", "best_layer", "weighted", "mlp_last",  "mlp_best", "dwatt",
                                              "set",        "fc-gin",     "fc-gcn",   "cayley-gin", "cayley-gcn"};

int cmd_compare(const TrainArgs& t, const GridArgs& g, std::vector<std::string> names, const Common& c,
                std::ostream& out) {
  if (names.empty()) names = kAllMethods;
  const TrainConfig base = train_config(t, c, "last_layer");
  std::vector<MethodConfig> methods;
  for (const std::string& name : names) {
    MethodConfig m = method_config(t, name);
    m.validate();
    methods.push_back(m);
  }
  const Grid grid = make_grid(g, base);
  const TaskDataset ds = load_dataset(t.data);
  const Report report = compare_methods(ds, methods, base, grid, c.jobs);
  if (c.json_output) {
    emit(c, out, json_text(to_json(report, JsonOptions{t.include_wall_time})));
  } else {
    emit(c, out, render_text(report));
  }
  return kOk;
}

// ---- few-shot -------------------------------------------------------------

int cmd_few_shot(const TrainArgs& t, const std::vector<std::size_t>& ks, const std::vector<std::uint64_t>& seeds_in,
                 const Common& c, std::ostream& out) {
  if (ks.empty()) throw InvalidArgument("few-shot: --ks must not be empty");
  for (std::size_t k : ks)
    if (k == 0) throw InvalidArgument("few-shot: every k in --ks must be at least 1");
  TrainConfig base = train_config(t, c, t.method);
  const TaskDataset ds = load_dataset(t.data);
  if (needs_layer(base.method)) {
    TrainConfig probe = base;
    probe.checkpoint_path.reset();
    base.method.selected_layer = layer_sweep(ds, probe).best_layer;
  }
  const std::vector<std::uint64_t> seeds = seeds_in.empty() ? std::vector<std::uint64_t>{c.seed} : seeds_in;
  const std::vector<FewShotPoint> curve = few_shot_curve(ds, base, ks, seeds, c.jobs);
  if (c.json_output) {
    json j;
    j["method"] = method_name(base.method);
    j["config"] = to_json(base);
    j["curve"] = to_json(curve);
    emit(c, out, json_text(j));
  } else {
    emit(c, out, "method " + method_name(base.method) + "\n" + render_text(curve));
  }
  const bool all_failed =
      std::all_of(curve.begin(), curve.end(), [](const FewShotPoint& p) { return p.scores.empty(); });
  return all_failed ? kNumericFailure : kOk;
}

// ---- sweep-layers ---------------------------------------------------------

int cmd_sweep(const TrainArgs& t, const Common& c, std::ostream& out) {
  const TrainConfig probe = train_config(t, c, "last_layer");
  const TaskDataset ds = load_dataset(t.data);
  const LayerSweep sweep = layer_sweep(ds, probe);
  if (c.json_output) {
    emit(c, out, json_text(to_json(sweep)));
  } else {
    emit(c, out, render_text(sweep));
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Inter-layer structural encoders over frozen-model layer representations", "ilse"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::Throw);

  Common common;

  CayleyArgs cayley;
  CLI::App* sub_cayley = app.add_subcommand("cayley", "Report the SL(2, Z_n) Cayley graph used for L layers");
  cayley.n_option = sub_cayley->add_option("--n", cayley.n, "Modulus n");
  cayley.layers_option = sub_cayley->add_option("--layers", cayley.layers, "Pick the smallest n covering L layers");
  sub_cayley->add_option("--edges", cayley.edges_path, "Write the edge list (\"u v\" per line) here");
  add_common(sub_cayley, common);

  SynthArgs synth;
  CLI::App* sub_synth = app.add_subcommand("gen-synth", "Generate a planted-signal dataset in LREP format");
  sub_synth->add_option("--task", synth.task, "classification or pair");
  sub_synth->add_option("--layers", synth.spec.layers, "Layers L");
  sub_synth->add_option("--dim", synth.spec.width, "Representation width d");
  sub_synth->add_option("--tokens", synth.spec.tokens, "Token draws pooled per row");
  sub_synth->add_option("--classes", synth.spec.classes, "Classes K");
  sub_synth->add_option("--planted-layer", synth.spec.planted_layer, "Layer carrying the signal");
  sub_synth->add_option("--snr", synth.spec.snr, "Signal strength at the planted layer");
  sub_synth->add_option("--leakage", synth.spec.leakage, "Per-layer decay of the signal away from it");
  sub_synth->add_option("--examples", synth.spec.examples, "Total examples, split 70/15/15");
  sub_synth->add_option("--train", synth.spec.train, "Explicit train count");
  sub_synth->add_option("--validation", synth.spec.validation, "Explicit validation count");
  sub_synth->add_option("--test", synth.spec.test, "Explicit test count");
  add_common(sub_synth, common);

  TrainArgs train_args;
  CLI::App* sub_train = app.add_subcommand("train", "Train one method and report metrics");
  add_train_flags(sub_train, train_args, true);
  sub_train->add_option("--layer", train_args.layer, "Layer for best_layer / mlp_best (default: layer sweep)");
  sub_train->add_option("--checkpoint", train_args.checkpoint, "Write best-validation parameters here");
  add_common(sub_train, common);

  GridArgs grid_args;
  std::vector<std::string> compare_methods_arg;
  CLI::App* sub_compare = app.add_subcommand("compare", "Grid-search and rank several methods");
  add_train_flags(sub_compare, train_args, false);
  sub_compare->add_option("--methods", compare_methods_arg, "Methods to compare (default: all)")->delimiter(',');
  add_grid_flags(sub_compare, grid_args);
  add_common(sub_compare, common);

  std::vector<std::size_t> ks{1, 2, 4, 8, 16, 32, 64, 128};
  std::vector<std::uint64_t> seeds;
  CLI::App* sub_few = app.add_subcommand("few-shot", "Test score against samples per label");
  add_train_flags(sub_few, train_args, true);
  sub_few->add_option("--ks", ks, "Samples per label")->delimiter(',');
  sub_few->add_option("--seeds", seeds, "One run per seed (default: --seed)")->delimiter(',');
  add_common(sub_few, common);

  CLI::App* sub_sweep = app.add_subcommand("sweep-layers", "Score every layer on its own");
  add_train_flags(sub_sweep, train_args, false);
  add_common(sub_sweep, common);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInvalidArgs;
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    if (!common.config_path.empty()) apply_config(active, common.config_path);
    resolve_seed(active, common);
    if (active == sub_cayley) return cmd_cayley(cayley, common, out);
    if (active == sub_synth) return cmd_gen_synth(synth, common, out);
    if (active == sub_train) return cmd_train(train_args, common, out);
    if (active == sub_compare) return cmd_compare(train_args, grid_args, compare_methods_arg, common, out);
    if (active == sub_few) return cmd_few_shot(train_args, ks, seeds, common, out);
    if (active == sub_sweep) return cmd_sweep(train_args, common, out);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidArgs;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidArgs;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const NumericFailure& e) {
    err << "error: " << e.what() << "\n";
    return kNumericFailure;
  } catch (const SearchFailure& e) {
    err << "error: " << e.what() << "\n";
    return kNumericFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}

}  // namespace ilse::cli
