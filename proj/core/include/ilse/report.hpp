#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ilse/training.hpp"

namespace ilse {

struct JsonOptions {
  // Wall time is the only non-deterministic field; it is emitted as 0 unless
  // requested so that repeated runs produce identical bytes.
  bool include_wall_time = false;
};

nlohmann::json to_json(const MethodConfig& config);
nlohmann::json to_json(const TrainConfig& config);
// { method, config, params, head_params, epochs: [{epoch, train_loss, val}],
//   best_epoch, val_best, test, test_pearson?, seed, wall_ms, near_chance,
//   status, failure? }
nlohmann::json to_json(const RunMetrics& metrics, const JsonOptions& options = {});
nlohmann::json to_json(const LayerSweep& sweep);
nlohmann::json to_json(const std::vector<FewShotPoint>& curve);
nlohmann::json to_json(const Report& report, const JsonOptions& options = {});

// Fixed-width table: rank, method, params, head, val, test.
std::string render_text(const Report& report);
std::string render_text(const std::vector<FewShotPoint>& curve);
std::string render_text(const LayerSweep& sweep);

}  // namespace ilse
