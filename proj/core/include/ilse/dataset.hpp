#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ilse/layer_stack.hpp"

namespace ilse {

enum class TaskKind : std::uint8_t { kClassification = 0, kPairRegression = 1 };
enum class Split : std::uint8_t { kTrain = 0, kValidation = 1, kTest = 2 };

const char* to_string(TaskKind kind);
const char* to_string(Split split);

// One labeled example. Classification uses `stack` and `label`; pair
// regression uses `stack`, `pair` and `gold` in [0, 1].
struct Example {
  LayerStack stack;
  LayerStack pair;
  std::uint32_t label = 0;
  double gold = 0.0;
  Split split = Split::kTrain;

  friend bool operator==(const Example&, const Example&) = default;
};

struct TaskDataset {
  TaskKind kind = TaskKind::kClassification;
  std::size_t layers = 0;
  std::size_t width = 0;
  std::uint32_t classes = 0;  // 0 for pair regression
  std::vector<Example> examples;

  // Throws InvalidArgument when shapes, labels or scores are inconsistent.
  void validate() const;
  std::vector<std::size_t> indices(Split split) const;
  std::size_t count(Split split) const { return indices(split).size(); }

  friend bool operator==(const TaskDataset&, const TaskDataset&) = default;
};

}  // namespace ilse
