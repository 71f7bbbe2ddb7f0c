#pragma once

#include <cstddef>
#include <array>
#include <cstdint>

#include "ilse/dataset.hpp"

namespace ilse {

// Planted-signal generator standing in for frozen-LLM layer representations.
// The task signal sits at `planted_layer` with strength `snr` relative to the
// unit gaussian noise of a single token; layer l carries leakage^|l - l*| of
// it. Every row is the mean of `tokens` token draws.
struct SynthSpec {
  TaskKind kind = TaskKind::kClassification;
  std::size_t layers = 12;
  std::size_t width = 32;
  std::size_t tokens = 8;
  std::uint32_t classes = 6;
  std::size_t planted_layer = 6;
  double snr = 4.0;
  double leakage = 0.3;
  std::uint64_t seed = 0;
  // Total size split 70/15/15 unless explicit per-split counts are given.
  std::size_t examples = 1000;
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;

  void validate() const;
  // {train, validation, test}
  std::array<std::size_t, 3> split_counts() const;
};

TaskDataset generate_synthetic(const SynthSpec& spec);

// Seeded stratified sample of min(k, available) training examples per class;
// validation and test are kept whole. Subsets are nested in k for a fixed
// seed. Throws InvalidArgument for pair tasks or k == 0.
TaskDataset few_shot_subset(const TaskDataset& dataset, std::size_t per_label, std::uint64_t seed);

}  // namespace ilse
