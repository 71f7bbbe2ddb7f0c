#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ilse/dataset.hpp"
#include "ilse/model.hpp"

namespace ilse {

struct TrainConfig {
  MethodConfig method;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  // 0 selects the task default: 64 for classification, 256 for pairs.
  std::size_t batch_size = 0;
  std::size_t max_epochs = 50;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  // Best-validation parameters are written here when set.
  std::optional<std::filesystem::path> checkpoint_path;

  void validate() const;
  std::size_t effective_batch_size(TaskKind kind) const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_score = 0.0;
};

struct RunMetrics {
  std::string method;
  TrainConfig config;
  std::size_t params = 0;       // encoder
  std::size_t head_params = 0;  // classification head
  std::vector<EpochRecord> epochs;
  // 0 means the untrained initialization won.
  std::size_t best_epoch = 0;
  double val_best = 0.0;
  double test = 0.0;
  // Pearson of predicted cosine vs gold; pair tasks only.
  std::optional<double> test_pearson;
  std::uint64_t seed = 0;
  double wall_ms = 0.0;
  // Validation never exceeded chance + 2 points (classification).
  bool near_chance = false;
  // Empty on success; otherwise the numeric failure that aborted the run.
  std::string failure;

  bool ok() const { return failure.empty(); }
};

struct TrainResult {
  RunMetrics metrics;
  ParamStore best_params;
};

// Accuracy (classification) or Spearman of cosine vs gold (pairs) of the
// model on one split. Pair scores use encoder outputs only.
double evaluate(Model& model, const TaskDataset& dataset, Split split);
double evaluate_pearson(Model& model, const TaskDataset& dataset, Split split);

// Mini-batch Adam with per-epoch validation, best-validation checkpointing
// and early stopping. Numeric failures are recorded in metrics.failure
// rather than thrown.
TrainResult train(const TaskDataset& dataset, const TrainConfig& config);

struct LayerSweep {
  std::vector<double> scores;  // one per layer, validation split
  std::size_t best_layer = 0;  // ties go to the deeper layer
};

// Classification: linear probe per layer (trained with `probe` settings).
// Pairs: Spearman of raw per-layer cosine. Requires a validation split.
LayerSweep layer_sweep(const TaskDataset& dataset, const TrainConfig& probe);

struct Grid {
  std::vector<double> lrs{1e-3};
  std::vector<double> weight_decays{1e-4};
  std::vector<double> dropouts{0.0};
  std::vector<int> mpnn_layers{};     // empty: keep base value
  std::vector<int> gin_mlp_depths{};  // empty: keep base value

  // Cartesian product in declaration order (lr outermost).
  std::vector<TrainConfig> expand(const TrainConfig& base) const;
};

struct GridResult {
  std::size_t best_index = 0;
  TrainConfig best_config;
  std::vector<RunMetrics> trace;
};

// Trains every grid point (up to `jobs` in parallel) and keeps the highest
// validation score; ties go to the earlier point. Throws SearchFailure when
// every run failed.
GridResult grid_search(const TaskDataset& dataset, const TrainConfig& base, const Grid& grid, std::size_t jobs = 1);

struct FewShotPoint {
  std::size_t per_label = 0;
  double mean = 0.0;
  double stdev = 0.0;
  std::vector<double> scores;  // per successful seed
  std::size_t failures = 0;
};

// For each k and seed: few_shot_subset(k, seed), train with that seed,
// record the test score.
std::vector<FewShotPoint> few_shot_curve(const TaskDataset& dataset, const TrainConfig& base,
                                         const std::vector<std::size_t>& ks, const std::vector<std::uint64_t>& seeds,
                                         std::size_t jobs = 1);

struct ReportRow {
  std::string method;
  std::size_t params = 0;
  std::size_t head_params = 0;
  double val = 0.0;
  double test = 0.0;
  RunMetrics best_run;
};

struct Report {
  std::vector<ReportRow> rows;  // sorted by test score, best first
  std::optional<LayerSweep> sweep;
};

// grid_search per method; best-layer kinds are resolved by one layer sweep.
Report compare_methods(const TaskDataset& dataset, const std::vector<MethodConfig>& methods, const TrainConfig& base,
                       const Grid& grid, std::size_t jobs = 1);

}  // namespace ilse
