// Desk-scale acceptance experiments (spec: ACCEPTANCE CRITERIA and the
// [DERIVED] examples of training_harness / cli). Every run is seeded; the
// reference numbers below were pinned from this suite's own runs and are
// compared with a tolerance that absorbs compiler/libm rounding differences
// while still catching behavioural changes.
#include <gtest/gtest.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "ilse/lrep.hpp"
#include "ilse/synthetic.hpp"
#include "ilse/training.hpp"

namespace ilse {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kSeeds[] = {0, 1, 2, 3, 4};
const std::vector<std::string> kIlse = {"set", "fc-gin", "fc-gcn", "cayley-gin", "cayley-gcn"};

// The planted dataset of the acceptance criteria: L=12, d=32, K=6, SNR=4,
// leakage=0.3, 600/150/150, planted layer 6.
SynthSpec planted_spec(std::uint64_t seed) {
  SynthSpec s;
  s.kind = TaskKind::kClassification;
  s.layers = 12;
  s.width = 32;
  s.classes = 6;
  s.planted_layer = 6;
  s.snr = 4.0;
  s.leakage = 0.3;
  s.seed = seed;
  s.examples = 900;
  s.train = 600;
  s.validation = 150;
  s.test = 150;
  return s;
}

TrainConfig config_for(const std::string& method, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.method = parse_method(method);
  cfg.seed = seed;
  return cfg;
}

double minutes_since(Clock::time_point start) {
  return std::chrono::duration<double, std::ratio<60>>(Clock::now() - start).count();
}

double mean(const std::vector<double>& xs) { return std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size(); }

// Pinned mean test accuracies over seeds 0-4, from this suite's seeded runs
// (Release build, GCC 11, x86-64). Per-seed values at pinning time:
//   last_layer  0.1000 0.1933 0.1733 0.1800 0.2267
//   set         1.0000 1.0000 1.0000 1.0000 1.0000
//   fc-gin      1.0000 1.0000 1.0000 0.9933 1.0000
//   fc-gcn      1.0000 1.0000 1.0000 1.0000 1.0000
//   cayley-gin  0.9933 1.0000 1.0000 1.0000 1.0000
//   cayley-gcn  1.0000 0.9933 1.0000 1.0000 0.9933
const std::map<std::string, double> kPinnedMean = {
    {"last_layer", 0.1747}, {"set", 1.0000},        {"fc-gin", 0.9987},
    {"fc-gcn", 1.0000},     {"cayley-gin", 0.9987}, {"cayley-gcn", 0.9973},
};
constexpr double kPinTolerance = 0.02;

// ---- planted-signal experiment -------------------------------------------------------

TEST(Acceptance, PlantedSignalIlseBeatsLastLayerAndSweepRecoversLayer) {
  const auto start = Clock::now();
  std::map<std::string, std::vector<double>> scores;
  std::size_t recovered = 0;
  for (std::uint64_t seed : kSeeds) {
    const TaskDataset ds = generate_synthetic(planted_spec(seed));
    const LayerSweep sweep = layer_sweep(ds, config_for("last_layer", seed));
    recovered += sweep.best_layer == 6 ? 1 : 0;
    std::printf("seed %llu sweep argmax %zu\n", static_cast<unsigned long long>(seed), sweep.best_layer);
    for (const std::string& m : std::vector<std::string>{"last_layer", "set", "fc-gin", "fc-gcn", "cayley-gin",
                                                         "cayley-gcn"}) {
      const RunMetrics r = train(ds, config_for(m, seed)).metrics;
      ASSERT_TRUE(r.ok()) << m << ": " << r.failure;
      scores[m].push_back(r.test);
    }
  }
  const double elapsed = minutes_since(start);
  const double last = mean(scores["last_layer"]);
  for (const auto& [m, xs] : scores) {
    std::printf("%-11s mean %.4f  [", m.c_str(), mean(xs));
    for (double x : xs) std::printf(" %.4f", x);
    std::printf(" ]\n");
    EXPECT_NEAR(mean(xs), kPinnedMean.at(m), kPinTolerance) << m;
  }
  for (const std::string& m : kIlse) EXPECT_GE(mean(scores[m]) - last, 0.10) << m;
  EXPECT_GE(recovered, 4u);
  std::printf("planted experiment: %.2f min\n", elapsed);
  EXPECT_LT(elapsed, 15.0);
}

// layer_sweep example: argmax == planted layer in >= 90% of 20 seeded runs.
TEST(Acceptance, LayerSweepRecoversPlantedLayerOverTwentySeeds) {
  std::size_t hits = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const TaskDataset ds = generate_synthetic(planted_spec(100 + seed));
    hits += layer_sweep(ds, config_for("last_layer", seed)).best_layer == 6 ? 1 : 0;
  }
  std::printf("sweep hits %zu / 20\n", hits);
  EXPECT_GE(hits, 18u);
}

// train example: Cayley-Encoder reaches >= 0.9 within 2 minutes single-threaded.
TEST(Acceptance, CayleyReachesNinetyPercentWithinTwoMinutes) {
  const TaskDataset ds = generate_synthetic(planted_spec(0));
  const auto start = Clock::now();
  const RunMetrics r = train(ds, config_for("cayley-gin", 0)).metrics;
  const double elapsed = minutes_since(start);
  std::printf("cayley-gin test %.4f in %.2f min\n", r.test, elapsed);
  EXPECT_GE(r.test, 0.9);
  EXPECT_LT(elapsed, 2.0);
}

// ---- few-shot -------------------------------------------------------------------------

TEST(Acceptance, CayleyAtThirtyTwoPerLabelBeatsFullDataLastLayer) {
  const auto start = Clock::now();
  std::size_t violations = 0;
  std::vector<double> few, full;
  for (std::uint64_t seed : kSeeds) {
    const TaskDataset ds = generate_synthetic(planted_spec(seed));
    const std::vector<FewShotPoint> curve = few_shot_curve(ds, config_for("cayley-gin", seed), {32}, {seed});
    ASSERT_EQ(curve.front().scores.size(), 1u);
    const double k32 = curve.front().scores.front();
    const double last = train(ds, config_for("last_layer", seed)).metrics.test;
    few.push_back(k32);
    full.push_back(last);
    violations += k32 >= last ? 0 : 1;
    std::printf("seed %llu cayley k=32 %.4f  last_layer full %.4f\n", static_cast<unsigned long long>(seed), k32, last);
  }
  EXPECT_LE(violations, 1u);
  EXPECT_GE(mean(few), mean(full));
  const double elapsed = minutes_since(start);
  std::printf("few-shot experiment: %.2f min\n", elapsed);
  EXPECT_LT(elapsed, 10.0);
}

// few_shot_curve example: mean at k=128 >= mean at k=8 - 2 points.
TEST(Acceptance, FewShotCurveIsWeaklyMonotone) {
  const TaskDataset ds = generate_synthetic(planted_spec(0));
  const std::vector<FewShotPoint> curve = few_shot_curve(ds, config_for("cayley-gin", 0), {8, 128}, {0, 1, 2});
  ASSERT_EQ(curve.size(), 2u);
  std::printf("k=8 %.4f  k=128 %.4f\n", curve[0].mean, curve[1].mean);
  EXPECT_GE(curve[1].mean, curve[0].mean - 0.02);
}

// ---- grid / compare / loss ---------------------------------------------------------------

// grid_search example: the selected config's test score is within 3 points of the trace's best.
TEST(Acceptance, GridSelectionIsWithinThreePointsOfBestTest) {
  const TaskDataset ds = generate_synthetic(planted_spec(0));
  Grid grid;
  grid.lrs = {1e-4, 1e-3};
  grid.weight_decays = {1e-4, 1e-3};
  const GridResult g = grid_search(ds, config_for("cayley-gin", 0), grid);
  ASSERT_EQ(g.trace.size(), 4u);
  double best = 0.0;
  for (const RunMetrics& r : g.trace) best = std::max(best, r.test);
  std::printf("selected %.4f best %.4f\n", g.trace[g.best_index].test, best);
  EXPECT_GE(g.trace[g.best_index].test, best - 0.03);
}

// compare_methods example: every ILSE encoder outranks last_layer.
TEST(Acceptance, CompareRanksEveryIlseEncoderAboveLastLayer) {
  const TaskDataset ds = generate_synthetic(planted_spec(0));
  std::vector<MethodConfig> methods;
  for (const std::string& m : kIlse) methods.push_back(parse_method(m));
  methods.push_back(parse_method("last_layer"));
  const Report report = compare_methods(ds, methods, config_for("set", 0), Grid{});
  ASSERT_EQ(report.rows.size(), 6u);
  EXPECT_EQ(report.rows.back().method, "last_layer");
  EXPECT_GT(report.rows[report.rows.size() - 2].test, report.rows.back().test);
}

// training_harness invariant: epoch-10 loss <= 0.5 x epoch-1 loss for every ILSE
// encoder, 5 seeds, one failure allowed per encoder.
TEST(Acceptance, TrainLossHalvesByEpochTen) {
  for (const std::string& m : kIlse) {
    std::size_t failures = 0;
    for (std::uint64_t seed : kSeeds) {
      TrainConfig cfg = config_for(m, seed);
      cfg.max_epochs = 10;
      const RunMetrics r = train(generate_synthetic(planted_spec(seed)), cfg).metrics;
      ASSERT_EQ(r.epochs.size(), 10u) << m;
      failures += r.epochs[9].train_loss <= 0.5 * r.epochs[0].train_loss ? 0 : 1;
    }
    EXPECT_LE(failures, 1u) << m;
  }
}

// ---- CLI determinism ------------------------------------------------------------------------

std::string run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  EXPECT_EQ(code, 0) << err.str();
  return out.str();
}

TEST(Acceptance, CliInvocationsAreByteIdentical) {
  const fs::path dir = fs::temp_directory_path() / "ilse_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string data = (dir / "planted.lrep").string();
  run_cli({"gen-synth", "--seed", "0", "--train", "600", "--validation", "150", "--test", "150", "--out", data});

  // train cayley-gin on generated synthetic -> test >= 0.9 under the pinned seed.
  const std::vector<std::vector<std::string>> invocations = {
      {"cayley", "--layers", "25", "--json"},
      {"train", "--data", data, "--method", "cayley-gin", "--seed", "0", "--json"},
      {"train", "--data", data, "--method", "dwatt", "--seed", "1", "--max-epochs", "5", "--json"},
      {"sweep-layers", "--data", data, "--seed", "2", "--json"},
      {"few-shot", "--data", data, "--method", "set", "--ks", "4,16", "--seeds", "0,1", "--max-epochs", "5", "--json"},
      {"compare", "--data", data, "--methods", "last_layer,set,fc-gcn,cayley-gin", "--max-epochs", "5", "--jobs", "2",
       "--json"},
  };
  for (const auto& args : invocations) {
    const std::string a = run_cli(args);
    const std::string b = run_cli(args);
    EXPECT_TRUE(a == b) << args.front();
    EXPECT_FALSE(a.empty());
  }
  const nlohmann::json trained = nlohmann::json::parse(run_cli(invocations[1]));
  EXPECT_EQ(trained["method"], "cayley-gin");
  EXPECT_GE(trained["test"].get<double>(), 0.9);
  EXPECT_EQ(nlohmann::json::parse(run_cli(invocations[3]))["argmax"], 6);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace ilse
