// Micro-benchmarks for the hot paths: graph construction, encoder
// forward/backward on a training batch, one training epoch and LREP I/O.
#include <benchmark/benchmark.h>

#include <sstream>
#include <string>
#include <vector>

#include "ilse/autodiff.hpp"
#include "ilse/cayley_graph.hpp"
#include "ilse/lrep.hpp"
#include "ilse/model.hpp"
#include "ilse/rng.hpp"
#include "ilse/synthetic.hpp"
#include "ilse/training.hpp"

namespace {

using namespace ilse;

const std::vector<std::string> kMethods = {"set", "fc-gin", "fc-gcn", "cayley-gin", "cayley-gcn",
                                           "weighted", "mlp_last", "dwatt"};

void BM_CayleyBuild(benchmark::State& state) {
  const auto n = static_cast<std::int64_t>(state.range(0));
  for (auto _ : state) {
    CayleyGraph g = build_cayley(n);
    benchmark::DoNotOptimize(g);
  }
  state.SetLabel(std::to_string(group_size(static_cast<std::uint64_t>(n))) + " nodes");
}
BENCHMARK(BM_CayleyBuild)->DenseRange(2, 12, 2);

// One forward + backward pass over a batch of 64 stacks (L=12, d=32, K=6).
void BM_EncoderStep(benchmark::State& state) {
  const std::string& name = kMethods[static_cast<std::size_t>(state.range(0))];
  constexpr std::size_t kBatch = 64, kLayers = 12, kWidth = 32;
  Model model(parse_method(name), TaskKind::kClassification, kLayers, kWidth, 6, 1);
  Rng rng(2);
  Tensor rows = Tensor::matrix(kBatch * kLayers, kWidth);
  for (double& x : rows.data()) x = rng.normal();
  std::vector<std::uint32_t> labels(kBatch);
  for (std::size_t i = 0; i < kBatch; ++i) labels[i] = static_cast<std::uint32_t>(i % 6);
  for (auto _ : state) {
    Tape tape(true);
    const Var loss = ops::cross_entropy(model.logits(tape.constant(rows), kBatch, nullptr), labels);
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.value(loss));
  }
  state.SetLabel(name);
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * kBatch));
}
BENCHMARK(BM_EncoderStep)->DenseRange(0, static_cast<int>(kMethods.size()) - 1)->Unit(benchmark::kMicrosecond);

SynthSpec planted() {
  SynthSpec s;
  s.examples = 900;
  s.train = 600;
  s.validation = 150;
  s.test = 150;
  return s;
}

// One epoch over the planted 600/150/150 dataset, including validation and test.
void BM_TrainOneEpoch(benchmark::State& state) {
  const TaskDataset ds = generate_synthetic(planted());
  TrainConfig cfg;
  cfg.method = parse_method(kMethods[static_cast<std::size_t>(state.range(0))]);
  cfg.max_epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train(ds, cfg).metrics.test);
  state.SetLabel(kMethods[static_cast<std::size_t>(state.range(0))]);
}
BENCHMARK(BM_TrainOneEpoch)->DenseRange(0, 4)->Unit(benchmark::kMillisecond);

void BM_LrepRoundTrip(benchmark::State& state) {
  const TaskDataset ds = generate_synthetic(planted());
  std::size_t bytes = 0;
  for (auto _ : state) {
    std::stringstream buf;
    write_lrep(buf, ds);
    bytes = buf.str().size();
    benchmark::DoNotOptimize(read_lrep(buf));
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * bytes));
}
BENCHMARK(BM_LrepRoundTrip)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
