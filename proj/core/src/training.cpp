#include "ilse/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "ilse/checkpoint.hpp"
#include "ilse/errors.hpp"
#include "ilse/metrics.hpp"
#include "ilse/optim.hpp"
#include "ilse/synthetic.hpp"

namespace ilse {
namespace {

constexpr std::size_t kEvalBatch = 256;

// Runs fn(i) for i in [0, count) on up to `jobs` threads. Each index writes
// only its own result slot, so the outcome does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::jthread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  workers.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Tensor gather_rows(const TaskDataset& ds, std::span<const std::size_t> idx, bool second) {
  std::vector<const LayerStack*> stacks;
  stacks.reserve(idx.size());
  for (std::size_t i : idx) stacks.push_back(second ? &ds.examples[i].pair : &ds.examples[i].stack);
  return batch_rows(stacks);
}

double safe_cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return dot / std::sqrt(aa * bb);
}

// Predicted cosine and gold per example of a pair-task split.
std::pair<std::vector<double>, std::vector<double>> pair_predictions(Model& model, const TaskDataset& ds, Split split) {
  const auto idx = ds.indices(split);
  std::vector<double> predicted, gold;
  for (std::size_t start = 0; start < idx.size(); start += kEvalBatch) {
    const std::span<const std::size_t> chunk(idx.data() + start, std::min(kEvalBatch, idx.size() - start));
    Tape tape(false);
    // Record both passes before taking references: tape values move as nodes are added.
    const Var va = model.represent(tape.constant(gather_rows(ds, chunk, false)), chunk.size(), nullptr);
    const Var vb = model.represent(tape.constant(gather_rows(ds, chunk, true)), chunk.size(), nullptr);
    const Tensor& a = tape.value(va);
    const Tensor& b = tape.value(vb);
    for (std::size_t r = 0; r < chunk.size(); ++r) {
      predicted.push_back(safe_cosine(a.row(r), b.row(r)));
      gold.push_back(ds.examples[chunk[r]].gold);
    }
  }
  return {std::move(predicted), std::move(gold)};
}

double correlation_or_zero(double (*fn)(std::span<const double>, std::span<const double>), const std::vector<double>& x,
                           const std::vector<double>& y) {
  try {
    return fn(x, y);
  } catch (const UndefinedCorrelation&) {
    return 0.0;
  }
}

Var batch_loss(Model& model, Tape& tape, const TaskDataset& ds, std::span<const std::size_t> batch, Rng& dropout) {
  if (ds.kind == TaskKind::kClassification) {
    std::vector<std::uint32_t> labels;
    for (std::size_t i : batch) labels.push_back(ds.examples[i].label);
    Var logits = model.logits(tape.constant(gather_rows(ds, batch, false)), batch.size(), &dropout);
    return ops::cross_entropy(logits, labels);
  }
  std::vector<double> gold;
  for (std::size_t i : batch) gold.push_back(ds.examples[i].gold);
  Var a = model.represent(tape.constant(gather_rows(ds, batch, false)), batch.size(), &dropout);
  Var b = model.represent(tape.constant(gather_rows(ds, batch, true)), batch.size(), &dropout);
  return ops::cosine_mse(a, b, gold);
}

}  // namespace

void TrainConfig::validate() const {
  method.validate();
  if (!(lr >= 1e-4 && lr <= 1e-3)) throw InvalidArgument("train config: lr must be in [1e-4, 1e-3]");
  if (!(weight_decay >= 1e-4 && weight_decay <= 1e-3)) {
    throw InvalidArgument("train config: weight decay must be in [1e-4, 1e-3]");
  }
  if (patience == 0) throw InvalidArgument("train config: patience must be positive");
}

std::size_t TrainConfig::effective_batch_size(TaskKind kind) const {
  if (batch_size != 0) return batch_size;
  return kind == TaskKind::kClassification ? 64 : 256;
}

double evaluate(Model& model, const TaskDataset& ds, Split split) {
  const auto idx = ds.indices(split);
  if (idx.empty()) throw InvalidArgument(std::string("evaluate: empty ") + to_string(split) + " split");
  if (ds.kind == TaskKind::kPairRegression) {
    const auto [predicted, gold] = pair_predictions(model, ds, split);
    return correlation_or_zero(&spearman, predicted, gold);
  }
  std::vector<std::uint32_t> predicted, gold;
  for (std::size_t start = 0; start < idx.size(); start += kEvalBatch) {
    const std::span<const std::size_t> chunk(idx.data() + start, std::min(kEvalBatch, idx.size() - start));
    Tape tape(false);
    const Tensor& logits = tape.value(model.logits(tape.constant(gather_rows(ds, chunk, false)), chunk.size(), nullptr));
    for (std::size_t r = 0; r < chunk.size(); ++r) {
      auto row = logits.row(r);
      predicted.push_back(static_cast<std::uint32_t>(std::max_element(row.begin(), row.end()) - row.begin()));
      gold.push_back(ds.examples[chunk[r]].label);
    }
  }
  return accuracy(predicted, gold);
}

double evaluate_pearson(Model& model, const TaskDataset& ds, Split split) {
  if (ds.kind != TaskKind::kPairRegression) throw InvalidArgument("evaluate_pearson: pair tasks only");
  const auto [predicted, gold] = pair_predictions(model, ds, split);
  return correlation_or_zero(&pearson, predicted, gold);
}

TrainResult train(const TaskDataset& ds, const TrainConfig& config) {
  config.validate();
  ds.validate();
  if (ds.count(Split::kValidation) == 0) throw InvalidArgument("train: dataset has no validation split");
  if (ds.count(Split::kTest) == 0) throw InvalidArgument("train: dataset has no test split");

  const auto started = std::chrono::steady_clock::now();
  Model model(config.method, ds.kind, ds.layers, ds.width, ds.classes, config.seed);

  TrainResult result;
  RunMetrics& m = result.metrics;
  m.method = method_name(config.method);
  m.config = config;
  m.params = model.encoder_param_count();
  m.head_params = model.head_param_count();
  m.seed = config.seed;

  try {
    double best_val = evaluate(model, ds, Split::kValidation);
    ParamStore best = model.params();

    if (model.trainable()) {
      const AdamOptions adam{config.lr, config.weight_decay};
      const std::size_t batch_size = config.effective_batch_size(ds.kind);
      std::vector<std::size_t> order = ds.indices(Split::kTrain);
      Rng shuffle_rng(config.seed, Stream::kShuffle);
      Rng dropout_rng(config.seed, Stream::kDropout);
      std::size_t stale = 0;
      for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
          const std::span<const std::size_t> batch(order.data() + start, std::min(batch_size, order.size() - start));
          Tape tape(true);
          Var loss = batch_loss(model, tape, ds, batch, dropout_rng);
          tape.backward(loss);
          adam_step(model.params(), adam);
          loss_sum += tape.value(loss)[0] * static_cast<double>(batch.size());
        }
        const double val = evaluate(model, ds, Split::kValidation);
        m.epochs.push_back({epoch, order.empty() ? 0.0 : loss_sum / static_cast<double>(order.size()), val});
        if (val > best_val) {
          best_val = val;
          m.best_epoch = epoch;
          best = model.params();
          stale = 0;
        } else if (++stale >= config.patience) {
          break;
        }
      }
    }

    model.params().copy_values_from(best);
    result.best_params = std::move(best);
    m.val_best = best_val;
    m.test = evaluate(model, ds, Split::kTest);
    if (ds.kind == TaskKind::kPairRegression) m.test_pearson = evaluate_pearson(model, ds, Split::kTest);
    if (ds.kind == TaskKind::kClassification) {
      m.near_chance = best_val <= 1.0 / static_cast<double>(ds.classes) + 0.02;
    }
    if (config.checkpoint_path) save_checkpoint(*config.checkpoint_path, result.best_params);
  } catch (const NumericFailure& e) {
    m.failure = e.what();
    m.test = std::nan("");
    m.val_best = std::nan("");
  }
  m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return result;
}

LayerSweep layer_sweep(const TaskDataset& ds, const TrainConfig& probe) {
  ds.validate();
  if (ds.count(Split::kValidation) == 0) throw InvalidArgument("layer_sweep: empty validation split");
  LayerSweep sweep;
  sweep.scores.resize(ds.layers);
  for (std::size_t l = 0; l < ds.layers; ++l) {
    if (ds.kind == TaskKind::kClassification) {
      TrainConfig c = probe;
      c.method = MethodConfig{};
      c.method.method = Method::kBestLayer;
      c.method.selected_layer = l;
      c.checkpoint_path.reset();
      const RunMetrics m = train(ds, c).metrics;
      if (!m.ok()) throw NumericFailure("layer_sweep: probe on layer " + std::to_string(l) + " failed: " + m.failure);
      sweep.scores[l] = m.val_best;
    } else {
      std::vector<double> predicted, gold;
      for (std::size_t i : ds.indices(Split::kValidation)) {
        const Example& e = ds.examples[i];
        predicted.push_back(safe_cosine(e.stack.row(l), e.pair.row(l)));
        gold.push_back(e.gold);
      }
      sweep.scores[l] = correlation_or_zero(&spearman, predicted, gold);
    }
  }
  for (std::size_t l = 0; l < ds.layers; ++l) {
    if (sweep.scores[l] >= sweep.scores[sweep.best_layer]) sweep.best_layer = l;
  }
  return sweep;
}

std::vector<TrainConfig> Grid::expand(const TrainConfig& base) const {
  auto or_base = [](const auto& values, auto fallback) {
    using T = typename std::decay_t<decltype(values)>::value_type;
    return values.empty() ? std::vector<T>{static_cast<T>(fallback)} : values;
  };
  const auto lr_values = or_base(lrs, base.lr);
  const auto wd_values = or_base(weight_decays, base.weight_decay);
  const auto dropout_values = or_base(dropouts, base.method.dropout);
  const bool graph = base.method.is_graph();
  const auto mpnn_values = graph ? or_base(mpnn_layers, base.method.mpnn_layers) : std::vector<int>{base.method.mpnn_layers};
  const bool gin = graph && base.method.aggregation == Aggregation::kGin;
  const auto depth_values = gin ? or_base(gin_mlp_depths, base.method.gin_mlp_depth)
                                : std::vector<int>{base.method.gin_mlp_depth};
  std::vector<TrainConfig> out;
  for (double lr : lr_values) {
    for (double wd : wd_values) {
      for (double dropout : dropout_values) {
        for (int mpnn : mpnn_values) {
          for (int depth : depth_values) {
            TrainConfig c = base;
            c.lr = lr;
            c.weight_decay = wd;
            c.method.dropout = dropout;
            c.method.mpnn_layers = mpnn;
            c.method.gin_mlp_depth = depth;
            out.push_back(std::move(c));
          }
        }
      }
    }
  }
  return out;
}

GridResult grid_search(const TaskDataset& ds, const TrainConfig& base, const Grid& grid, std::size_t jobs) {
  const auto configs = grid.expand(base);
  if (configs.empty()) throw InvalidArgument("grid_search: empty grid");
  for (const auto& c : configs) c.validate();
  GridResult result;
  result.trace.resize(configs.size());
  parallel_for(configs.size(), jobs, [&](std::size_t i) { result.trace[i] = train(ds, configs[i]).metrics; });
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < result.trace.size(); ++i) {
    if (!result.trace[i].ok()) continue;
    if (!best || result.trace[i].val_best > result.trace[*best].val_best) best = i;
  }
  if (!best) throw SearchFailure("grid_search: every run failed");
  result.best_index = *best;
  result.best_config = configs[*best];
  return result;
}

std::vector<FewShotPoint> few_shot_curve(const TaskDataset& ds, const TrainConfig& base,
                                         const std::vector<std::size_t>& ks, const std::vector<std::uint64_t>& seeds,
                                         std::size_t jobs) {
  if (ds.kind != TaskKind::kClassification) throw InvalidArgument("few_shot_curve: classification only");
  if (seeds.empty()) throw InvalidArgument("few_shot_curve: need at least one seed");
  const std::size_t cells = ks.size() * seeds.size();
  std::vector<std::optional<double>> scores(cells);
  parallel_for(cells, jobs, [&](std::size_t cell) {
    const std::size_t k = ks[cell / seeds.size()];
    const std::uint64_t seed = seeds[cell % seeds.size()];
    TrainConfig c = base;
    c.seed = seed;
    c.checkpoint_path.reset();
    try {
      const RunMetrics m = train(few_shot_subset(ds, k, seed), c).metrics;
      if (m.ok()) scores[cell] = m.test;
    } catch (const Error&) {
      // recorded as a failed cell
    }
  });
  std::vector<FewShotPoint> curve;
  for (std::size_t ki = 0; ki < ks.size(); ++ki) {
    FewShotPoint p;
    p.per_label = ks[ki];
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      const auto& s = scores[ki * seeds.size() + si];
      if (s) {
        p.scores.push_back(*s);
      } else {
        ++p.failures;
      }
    }
    if (!p.scores.empty()) {
      const double n = static_cast<double>(p.scores.size());
      p.mean = std::accumulate(p.scores.begin(), p.scores.end(), 0.0) / n;
      double var = 0.0;
      for (double s : p.scores) var += (s - p.mean) * (s - p.mean);
      p.stdev = p.scores.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    } else {
      p.mean = p.stdev = std::nan("");
    }
    curve.push_back(std::move(p));
  }
  return curve;
}

Report compare_methods(const TaskDataset& ds, const std::vector<MethodConfig>& methods, const TrainConfig& base,
                       const Grid& grid, std::size_t jobs) {
  if (methods.empty()) throw InvalidArgument("compare_methods: no methods");
  Report report;
  const bool needs_sweep = std::any_of(methods.begin(), methods.end(), [](const MethodConfig& m) {
    return (m.method == Method::kBestLayer || m.method == Method::kMlpBest) && !m.selected_layer;
  });
  if (needs_sweep) {
    TrainConfig probe = base;
    probe.checkpoint_path.reset();
    report.sweep = layer_sweep(ds, probe);
  }
  for (MethodConfig method : methods) {
    if ((method.method == Method::kBestLayer || method.method == Method::kMlpBest) && !method.selected_layer) {
      method.selected_layer = report.sweep->best_layer;
    }
    TrainConfig c = base;
    c.method = method;
    c.checkpoint_path.reset();
    GridResult g = grid_search(ds, c, grid, jobs);
    const RunMetrics& best = g.trace[g.best_index];
    report.rows.push_back({best.method, best.params, best.head_params, best.val_best, best.test, best});
  }
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const ReportRow& a, const ReportRow& b) { return a.test > b.test; });
  return report;
}

}  // namespace ilse
