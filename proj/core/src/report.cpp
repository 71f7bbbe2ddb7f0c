#include "ilse/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace ilse {
namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

std::string fixed(double v, int precision = 4) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

}  // namespace

nlohmann::json to_json(const MethodConfig& c) {
  nlohmann::json j{{"method", method_name(c)}, {"hidden", c.hidden}, {"dropout", c.dropout}};
  if (c.is_graph()) {
    j["aggregation"] = c.aggregation == Aggregation::kGin ? "gin" : "gcn";
    j["mpnn_layers"] = c.mpnn_layers;
    if (c.aggregation == Aggregation::kGin) j["gin_mlp_depth"] = c.gin_mlp_depth;
  }
  if (c.selected_layer) j["selected_layer"] = *c.selected_layer;
  return j;
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j = to_json(c.method);
  j["lr"] = c.lr;
  j["weight_decay"] = c.weight_decay;
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["seed"] = c.seed;
  return j;
}

nlohmann::json to_json(const RunMetrics& m, const JsonOptions& options) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : m.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", number_or_null(e.train_loss)}, {"val", number_or_null(e.val_score)}});
  }
  nlohmann::json j{{"method", m.method},
                   {"config", to_json(m.config)},
                   {"params", m.params},
                   {"head_params", m.head_params},
                   {"epochs", std::move(epochs)},
                   {"best_epoch", m.best_epoch},
                   {"val_best", number_or_null(m.val_best)},
                   {"test", number_or_null(m.test)},
                   {"seed", m.seed},
                   {"wall_ms", options.include_wall_time ? m.wall_ms : 0.0},
                   {"near_chance", m.near_chance},
                   {"status", m.ok() ? "ok" : "numeric_failure"}};
  if (m.test_pearson) j["test_pearson"] = number_or_null(*m.test_pearson);
  if (!m.ok()) j["failure"] = m.failure;
  return j;
}

nlohmann::json to_json(const LayerSweep& sweep) {
  nlohmann::json scores = nlohmann::json::array();
  for (double s : sweep.scores) scores.push_back(number_or_null(s));
  return {{"scores", std::move(scores)}, {"argmax", sweep.best_layer}};
}

nlohmann::json to_json(const std::vector<FewShotPoint>& curve) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& p : curve) {
    nlohmann::json scores = nlohmann::json::array();
    for (double s : p.scores) scores.push_back(number_or_null(s));
    rows.push_back({{"k", p.per_label},
                    {"mean", number_or_null(p.mean)},
                    {"stdev", number_or_null(p.stdev)},
                    {"scores", std::move(scores)},
                    {"failures", p.failures}});
  }
  return rows;
}

nlohmann::json to_json(const Report& report, const JsonOptions& options) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"method", r.method},
                    {"params", r.params},
                    {"head_params", r.head_params},
                    {"val", number_or_null(r.val)},
                    {"test", number_or_null(r.test)},
                    {"best_run", to_json(r.best_run, options)}});
  }
  nlohmann::json j{{"rows", std::move(rows)}};
  if (report.sweep) j["layer_sweep"] = to_json(*report.sweep);
  return j;
}

std::string render_text(const Report& report) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-4s %-12s %10s %8s %8s %8s\n", "rank", "method", "params", "head", "val", "test");
  os << line;
  std::size_t rank = 1;
  for (const auto& r : report.rows) {
    std::snprintf(line, sizeof(line), "%-4zu %-12s %10zu %8zu %8s %8s\n", rank++, r.method.c_str(), r.params,
                  r.head_params, fixed(r.val).c_str(), fixed(r.test).c_str());
    os << line;
  }
  if (report.sweep) os << "best layer: " << report.sweep->best_layer << '\n';
  return os.str();
}

std::string render_text(const std::vector<FewShotPoint>& curve) {
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof(line), "%6s %8s %8s %6s\n", "k", "mean", "stdev", "fails");
  os << line;
  for (const auto& p : curve) {
    std::snprintf(line, sizeof(line), "%6zu %8s %8s %6zu\n", p.per_label, fixed(p.mean).c_str(), fixed(p.stdev).c_str(),
                  p.failures);
    os << line;
  }
  return os.str();
}

std::string render_text(const LayerSweep& sweep) {
  std::ostringstream os;
  for (std::size_t l = 0; l < sweep.scores.size(); ++l) {
    os << (l == sweep.best_layer ? "* " : "  ") << "layer " << l << "  " << fixed(sweep.scores[l]) << '\n';
  }
  return os.str();
}

}  // namespace ilse
