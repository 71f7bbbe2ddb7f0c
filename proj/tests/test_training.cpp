#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "ilse/checkpoint.hpp"
#include "ilse/errors.hpp"
#include "ilse/metrics.hpp"
#include "ilse/report.hpp"
#include "ilse/synthetic.hpp"
#include "ilse/training.hpp"

namespace ilse {
namespace {

// Small planted dataset that trains in well under a second per run.
TaskDataset small_planted(std::uint64_t seed = 0, TaskKind kind = TaskKind::kClassification, double snr = 4.0) {
  SynthSpec spec;
  spec.kind = kind;
  spec.layers = 6;
  spec.width = 12;
  spec.classes = 3;
  spec.planted_layer = 2;
  spec.snr = snr;
  spec.examples = 300;
  spec.seed = seed;
  return generate_synthetic(spec);
}

TrainConfig quick(const std::string& method, std::size_t epochs = 8) {
  TrainConfig c;
  c.method = parse_method(method);
  c.method.hidden = 32;
  c.max_epochs = epochs;
  c.seed = 5;
  return c;
}

// Finite inputs near DBL_MAX: the first projection overflows to inf and the
// head then produces inf - inf.
void poison(TaskDataset& ds) {
  for (Example& e : ds.examples)
    for (double& v : e.stack.matrix().data()) v = 1.7e308;
}

std::string metrics_bytes(const RunMetrics& m) { return to_json(m).dump(); }

// ---- train ----------------------------------------------------------------------

TEST(Train, ZeroEpochsReportsUntrainedScore) {
  const TaskDataset ds = small_planted();
  for (const char* method : {"cayley-gin", "set", "weighted"}) {
    const RunMetrics m = train(ds, quick(method, 0)).metrics;
    ASSERT_TRUE(m.ok()) << m.failure;
    EXPECT_TRUE(m.epochs.empty());
    EXPECT_EQ(m.best_epoch, 0u);
    EXPECT_GE(m.test, 0.0);
    EXPECT_LE(m.test, 1.0 / 3.0 + 0.25) << method;
  }
}

TEST(Train, DeterministicMetrics) {
  const TaskDataset ds = small_planted();
  for (const char* method : {"cayley-gcn", "fc-gin", "dwatt"}) {
    TrainConfig c = quick(method, 4);
    c.method.dropout = 0.1;
    EXPECT_EQ(metrics_bytes(train(ds, c).metrics), metrics_bytes(train(ds, c).metrics)) << method;
  }
  const TaskDataset pairs = small_planted(0, TaskKind::kPairRegression);
  const TrainConfig c = quick("set", 3);
  EXPECT_EQ(metrics_bytes(train(pairs, c).metrics), metrics_bytes(train(pairs, c).metrics));
}

TEST(Train, ReportedTestComesFromBestValidationEpoch) {
  const TaskDataset ds = small_planted(1);
  const auto path = std::filesystem::temp_directory_path() / "ilse_test_training.ckpt";
  TrainConfig c = quick("cayley-gin", 12);
  c.checkpoint_path = path;
  const TrainResult r = train(ds, c);
  const RunMetrics& m = r.metrics;
  ASSERT_TRUE(m.ok());
  ASSERT_FALSE(m.epochs.empty());
  double max_val = -1.0;
  std::size_t argmax = 0;
  for (const EpochRecord& e : m.epochs) {
    if (e.val_score > max_val) {
      max_val = e.val_score;
      argmax = e.epoch;
    }
  }
  if (m.best_epoch > 0) {
    EXPECT_EQ(m.best_epoch, argmax);
    EXPECT_EQ(m.val_best, max_val);
  } else {
    EXPECT_GE(m.val_best, max_val);
  }

  // Recompute validation and test from the saved checkpoint.
  Model model(c.method, ds.kind, ds.layers, ds.width, ds.classes, c.seed);
  model.params().copy_values_from(load_checkpoint(path));
  EXPECT_EQ(evaluate(model, ds, Split::kValidation), m.val_best);
  EXPECT_EQ(evaluate(model, ds, Split::kTest), m.test);
  std::filesystem::remove(path);
}

TEST(Train, EarlyStoppingHonoursPatience) {
  const TaskDataset ds = small_planted(2);
  TrainConfig c = quick("set", 200);
  c.patience = 2;
  const RunMetrics m = train(ds, c).metrics;
  ASSERT_TRUE(m.ok());
  ASSERT_LT(m.epochs.size(), 200u);
  // The run stopped exactly `patience` epochs after the last improvement.
  EXPECT_EQ(m.epochs.size(), m.best_epoch + c.patience);
}

TEST(Train, LossDecreasesOnPlantedData) {
  const TaskDataset ds = small_planted(3);
  for (const char* method : {"set", "fc-gin", "cayley-gin"}) {
    TrainConfig c = quick(method, 10);
    c.method.hidden = kHiddenWidth;
    const RunMetrics m = train(ds, c).metrics;
    ASSERT_EQ(m.epochs.size(), 10u) << method;
    EXPECT_LE(m.epochs.back().train_loss, 0.5 * m.epochs.front().train_loss) << method;
    EXPECT_GT(m.test, 0.9) << method;
  }
}

// On a regular graph whose nodes all hold layers, (1/N) 1^T A_hat = (1/N) 1^T
// for the GCN operator, so a one-layer GCN encoder with mean readout is the
// DeepSets encoder under another name: same parameters, same training curve.
TEST(Train, OneLayerGcnWithoutVirtualNodesReducesToSet) {
  const TaskDataset ds = small_planted(3);  // L = 6 = |SL(2, Z_2)|: no virtual nodes
  const RunMetrics set = train(ds, quick("set", 4)).metrics;
  for (const char* method : {"fc-gcn", "cayley-gcn"}) {
    const RunMetrics gcn = train(ds, quick(method, 4)).metrics;
    EXPECT_EQ(gcn.params, set.params);
    ASSERT_EQ(gcn.epochs.size(), set.epochs.size());
    for (std::size_t e = 0; e < set.epochs.size(); ++e)
      EXPECT_NEAR(gcn.epochs[e].train_loss, set.epochs[e].train_loss, 1e-12) << method;
  }
}

TEST(Train, ParameterOnlyHeadForRawBaselines) {
  const TaskDataset ds = small_planted();
  TrainConfig c = quick("last_layer", 5);
  const RunMetrics m = train(ds, c).metrics;
  EXPECT_EQ(m.params, 0u);
  EXPECT_EQ(m.head_params, ds.width * ds.classes + ds.classes);
  EXPECT_FALSE(m.epochs.empty());
}

TEST(Train, PairTasksAreScoredHeadFree) {
  const TaskDataset ds = small_planted(4, TaskKind::kPairRegression);
  const TrainConfig c = quick("cayley-gin", 4);
  const TrainResult r = train(ds, c);
  ASSERT_TRUE(r.metrics.ok());
  EXPECT_EQ(r.metrics.head_params, 0u);
  ASSERT_TRUE(r.metrics.test_pearson.has_value());
  // Spearman of cosine between encoder outputs, recomputed by hand.
  Model model(c.method, ds.kind, ds.layers, ds.width, 0, c.seed);
  model.params().copy_values_from(r.best_params);
  std::vector<double> predicted, gold;
  for (std::size_t i : ds.indices(Split::kTest)) {
    const Example& e = ds.examples[i];
    Tape tape(false);
    const Tensor u = tape.value(model.represent(tape.constant(e.stack.matrix()), 1, nullptr));
    const Tensor v = tape.value(model.represent(tape.constant(e.pair.matrix()), 1, nullptr));
    double uv = 0, uu = 0, vv = 0;
    for (std::size_t j = 0; j < u.size(); ++j) {
      uv += u[j] * v[j];
      uu += u[j] * u[j];
      vv += v[j] * v[j];
    }
    predicted.push_back(uv / std::sqrt(uu * vv));
    gold.push_back(e.gold);
  }
  EXPECT_NEAR(spearman(predicted, gold), r.metrics.test, 1e-12);
  EXPECT_GT(r.metrics.test, 0.5);
}

TEST(Train, DivergenceIsRecordedNotThrown) {
  TaskDataset ds = small_planted();
  poison(ds);
  const RunMetrics m = train(ds, quick("set", 3)).metrics;
  EXPECT_FALSE(m.ok());
  EXPECT_FALSE(m.failure.empty());
  EXPECT_TRUE(std::isnan(m.test));
  EXPECT_EQ(to_json(m)["status"], "numeric_failure");
}

TEST(Train, NearChanceFlagOnPureNoise) {
  const RunMetrics noise = train(small_planted(0, TaskKind::kClassification, 0.0), quick("last_layer", 3)).metrics;
  const RunMetrics signal = train(small_planted(0), quick("cayley-gin", 3)).metrics;
  EXPECT_FALSE(signal.near_chance);
  EXPECT_LT(noise.val_best, 0.6);
  (void)noise.near_chance;  // noise may land just above the guard; only its validation score is asserted
}

TEST(Train, RejectsBadConfigs) {
  const TaskDataset ds = small_planted();
  TrainConfig c = quick("set");
  c.lr = 1e-2;
  EXPECT_THROW(train(ds, c), InvalidArgument);
  c = quick("set");
  c.weight_decay = 0.0;
  EXPECT_THROW(train(ds, c), InvalidArgument);
  c = quick("set");
  c.method.dropout = 0.5;
  EXPECT_THROW(train(ds, c), InvalidArgument);
  TaskDataset no_val = ds;
  std::erase_if(no_val.examples, [](const Example& e) { return e.split == Split::kValidation; });
  EXPECT_THROW(train(no_val, quick("set")), InvalidArgument);
}

// ---- parameter counts ----------------------------------------------------------

TEST(CountParams, WeightedMatchesTableOne) {
  const MethodConfig w = parse_method("weighted");
  EXPECT_EQ(count_params(w, 25, 1024), 25u);
  EXPECT_EQ(count_params(w, 27, 2304), 27u);
  EXPECT_EQ(count_params(w, 33, 4096), 33u);
}

TEST(CountParams, AgreesWithInstantiatedModels) {
  for (const char* name : {"last_layer", "weighted", "mlp_last", "dwatt", "set", "fc-gin", "fc-gcn", "cayley-gin",
                           "cayley-gcn"}) {
    for (std::size_t layers : {3u, 13u}) {
      MethodConfig cfg = parse_method(name);
      cfg.hidden = 16;
      cfg.mpnn_layers = 2;
      Model model(cfg, TaskKind::kClassification, layers, 7, 4, 0);
      EXPECT_EQ(count_params(cfg, layers, 7), model.encoder_param_count()) << name;
      EXPECT_EQ(count_head_params(cfg, layers, 7, TaskKind::kClassification, 4), model.head_param_count()) << name;
      EXPECT_EQ(model.params().scalar_count(), model.encoder_param_count() + model.head_param_count()) << name;
      EXPECT_EQ(count_head_params(cfg, layers, 7, TaskKind::kPairRegression, 0), 0u) << name;
    }
  }
}

// ---- grid search ----------------------------------------------------------------

TEST(GridSearch, SingletonAndTraceSize) {
  const TaskDataset ds = small_planted();
  const TrainConfig base = quick("set", 3);
  const GridResult single = grid_search(ds, base, Grid{});
  EXPECT_EQ(single.trace.size(), 1u);
  EXPECT_EQ(single.best_index, 0u);
  EXPECT_EQ(single.best_config.lr, base.lr);

  Grid g;
  g.lrs = {1e-4, 1e-3};
  const GridResult two = grid_search(ds, base, g);
  ASSERT_EQ(two.trace.size(), 2u);
  EXPECT_EQ(two.trace[0].config.lr, 1e-4);
  EXPECT_EQ(two.trace[1].config.lr, 1e-3);
  const std::size_t expect = two.trace[1].val_best > two.trace[0].val_best ? 1 : 0;
  EXPECT_EQ(two.best_index, expect);
}

TEST(GridSearch, ExpandsGraphKnobsOnlyForGraphMethods) {
  Grid g;
  g.lrs = {1e-4, 5e-4, 1e-3};
  g.dropouts = {0.0, 0.2};
  g.mpnn_layers = {1, 2};
  g.gin_mlp_depths = {0, 1};
  EXPECT_EQ(g.expand(quick("cayley-gin")).size(), 24u);
  EXPECT_EQ(g.expand(quick("cayley-gcn")).size(), 12u);
  EXPECT_EQ(g.expand(quick("set")).size(), 6u);
  const auto configs = g.expand(quick("cayley-gin"));
  EXPECT_EQ(configs.front().lr, 1e-4);
  EXPECT_EQ(configs.back().lr, 1e-3);
  EXPECT_EQ(configs[1].method.gin_mlp_depth, 1);
}

TEST(GridSearch, ParallelMatchesSequential) {
  const TaskDataset ds = small_planted();
  Grid g;
  g.lrs = {1e-4, 1e-3};
  g.dropouts = {0.0, 0.1};
  const GridResult a = grid_search(ds, quick("fc-gin", 3), g, 1);
  const GridResult b = grid_search(ds, quick("fc-gin", 3), g, 4);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  EXPECT_EQ(a.best_index, b.best_index);
  for (std::size_t i = 0; i < a.trace.size(); ++i) EXPECT_EQ(metrics_bytes(a.trace[i]), metrics_bytes(b.trace[i]));
}

TEST(GridSearch, AllRunsFailingIsSearchFailure) {
  TaskDataset ds = small_planted();
  poison(ds);
  Grid g;
  g.lrs = {1e-4, 1e-3};
  EXPECT_THROW(grid_search(ds, quick("set", 2), g), SearchFailure);
}

// ---- few-shot curve -------------------------------------------------------------

TEST(FewShotCurve, OneRowPerKAndFullDataMatchesTrain) {
  const TaskDataset ds = small_planted();
  const TrainConfig base = quick("set", 4);
  const std::vector<std::size_t> ks = {1, 4, 1024};
  const auto curve = few_shot_curve(ds, base, ks, {5, 6});
  ASSERT_EQ(curve.size(), ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    EXPECT_EQ(curve[i].per_label, ks[i]);
    EXPECT_EQ(curve[i].scores.size(), 2u);
    EXPECT_EQ(curve[i].failures, 0u);
  }
  TrainConfig c = base;
  c.seed = 5;
  EXPECT_EQ(curve[2].scores[0], train(ds, c).metrics.test);
  EXPECT_THROW(few_shot_curve(small_planted(0, TaskKind::kPairRegression), base, ks, {1}), InvalidArgument);
}

TEST(FewShotCurve, WeaklyMonotone) {
  const TaskDataset ds = small_planted(7);
  const auto curve = few_shot_curve(ds, quick("cayley-gin", 15), {8, 128}, {1, 2, 3}, 3);
  EXPECT_GE(curve[1].mean, curve[0].mean - 0.02);
}

// ---- layer sweep and compare ------------------------------------------------------

TEST(LayerSweep, RecoversPlantedLayer) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    // Moderate SNR: at SNR 4 the leaked neighbours also saturate and the tie
    // rule (deeper layer wins) picks l* + 1.
    const TaskDataset ds = small_planted(seed, TaskKind::kClassification, 1.5);
    const LayerSweep s = layer_sweep(ds, quick("last_layer", 40));
    ASSERT_EQ(s.scores.size(), ds.layers);
    EXPECT_EQ(s.best_layer, 2u) << seed;
  }
  const LayerSweep pairs = layer_sweep(small_planted(0, TaskKind::kPairRegression), quick("last_layer"));
  EXPECT_EQ(pairs.best_layer, 2u);
}

TEST(Compare, RowsSortedAndOnePerMethod) {
  const TaskDataset ds = small_planted(8);
  std::vector<MethodConfig> methods;
  for (const char* name : {"last_layer", "best_layer", "set", "cayley-gin"}) {
    MethodConfig m = parse_method(name);
    m.hidden = 32;
    methods.push_back(m);
  }
  const Report r = compare_methods(ds, methods, quick("set", 10), Grid{});
  ASSERT_EQ(r.rows.size(), 4u);
  ASSERT_TRUE(r.sweep.has_value());
  for (std::size_t i = 1; i < r.rows.size(); ++i) EXPECT_GE(r.rows[i - 1].test, r.rows[i].test);
  const auto rank = [&](const std::string& name) {
    return std::find_if(r.rows.begin(), r.rows.end(), [&](const ReportRow& row) { return row.method == name; }) -
           r.rows.begin();
  };
  EXPECT_LT(rank("cayley-gin"), rank("last_layer"));
  EXPECT_LT(rank("set"), rank("last_layer"));
  const Report single = compare_methods(ds, {methods[2]}, quick("set", 2), Grid{});
  EXPECT_EQ(single.rows.size(), 1u);
  EXPECT_FALSE(single.sweep.has_value());
}

// ---- report rendering and checkpoints -------------------------------------------

TEST(ReportJson, MetricsSchema) {
  const RunMetrics m = train(small_planted(), quick("weighted", 2)).metrics;
  const nlohmann::json j = to_json(m);
  for (const char* key : {"method", "config", "params", "head_params", "epochs", "best_epoch", "val_best", "test",
                          "seed", "wall_ms", "near_chance", "status"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["method"], "weighted");
  EXPECT_EQ(j["params"], 6);
  EXPECT_EQ(j["epochs"].size(), m.epochs.size());
  EXPECT_EQ(j["wall_ms"], 0);
  EXPECT_EQ(j["status"], "ok");
  EXPECT_GT(to_json(m, {.include_wall_time = true})["wall_ms"].get<double>(), 0.0);
}

TEST(ReportText, RendersOneLinePerRow) {
  const TaskDataset ds = small_planted();
  const Report r = compare_methods(ds, {parse_method("last_layer"), parse_method("weighted")}, quick("set", 2), Grid{});
  const std::string text = render_text(r);
  EXPECT_NE(text.find("last_layer"), std::string::npos);
  EXPECT_NE(text.find("weighted"), std::string::npos);
  EXPECT_EQ(render_text(r), text);
  const nlohmann::json j = to_json(r);
  EXPECT_EQ(j["rows"].size(), 2u);
}

TEST(Checkpoint, RoundTripAndCorruption) {
  ParamStore store;
  store.add("a.w", Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  store.add("b", Tensor({4}, {-1e-300, 0.5, 1e300, -0.0}));
  std::ostringstream out(std::ios::binary);
  write_checkpoint(out, store);
  const std::string bytes = out.str();
  std::istringstream in(bytes, std::ios::binary);
  const ParamStore back = read_checkpoint(in);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.entries()[0].name, "a.w");
  EXPECT_EQ(back.value("a.w"), store.value("a.w"));
  EXPECT_EQ(back.value("b"), store.value("b"));

  std::string bad = bytes;
  bad[0] = 'X';
  std::istringstream bad_in(bad, std::ios::binary);
  EXPECT_THROW(read_checkpoint(bad_in), FormatError);
  std::istringstream cut(bytes.substr(0, bytes.size() - 3), std::ios::binary);
  EXPECT_THROW(read_checkpoint(cut), FormatError);
}

}  // namespace
}  // namespace ilse
