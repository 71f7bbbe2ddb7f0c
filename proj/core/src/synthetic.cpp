#include "ilse/synthetic.hpp"

#include <cmath>
#include <numeric>

#include "ilse/errors.hpp"
#include "ilse/rng.hpp"

namespace ilse {
namespace {

double round_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

std::vector<double> random_unit(Rng& rng, std::size_t d) {
  std::vector<double> v(d);
  double norm = 0.0;
  while (norm < 1e-12) {
    norm = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
  }
  for (double& x : v) x /= norm;
  return v;
}

// Gram-Schmidt on gaussian draws.
std::vector<std::vector<double>> orthonormal_directions(Rng& rng, std::size_t count, std::size_t d) {
  std::vector<std::vector<double>> out;
  while (out.size() < count) {
    std::vector<double> v = random_unit(rng, d);
    for (const auto& u : out) {
      const double dot = std::inner_product(v.begin(), v.end(), u.begin(), 0.0);
      for (std::size_t j = 0; j < d; ++j) v[j] -= dot * u[j];
    }
    const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (norm < 1e-6) continue;
    for (double& x : v) x /= norm;
    out.push_back(std::move(v));
  }
  return out;
}

double layer_coefficient(const SynthSpec& s, std::size_t layer) {
  const auto dist = static_cast<double>(layer > s.planted_layer ? layer - s.planted_layer : s.planted_layer - layer);
  return dist == 0.0 ? 1.0 : std::pow(s.leakage, dist);
}

// Row l = mean over T tokens of (snr * c_l * direction + unit gaussian noise).
LayerStack planted_stack(const SynthSpec& s, const std::vector<double>& direction, Rng& rng) {
  LayerStack stack(s.layers, s.width);
  std::vector<double> acc(s.width);
  for (std::size_t l = 0; l < s.layers; ++l) {
    const double c = s.snr * layer_coefficient(s, l);
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t t = 0; t < s.tokens; ++t) {
      for (std::size_t j = 0; j < s.width; ++j) acc[j] += c * direction[j] + rng.normal();
    }
    for (std::size_t j = 0; j < s.width; ++j) stack.at(l, j) = round_f32(acc[j] / static_cast<double>(s.tokens));
  }
  return stack;
}

}  // namespace

void SynthSpec::validate() const {
  if (layers == 0 || width == 0) throw InvalidArgument("synthetic: L and d must be positive");
  if (tokens == 0) throw InvalidArgument("synthetic: need at least one token");
  if (planted_layer >= layers) throw InvalidArgument("synthetic: planted layer must be < L");
  if (!(snr >= 0.0) || !std::isfinite(snr)) throw InvalidArgument("synthetic: SNR must be non-negative");
  if (!(leakage >= 0.0 && leakage < 1.0)) throw InvalidArgument("synthetic: leakage must be in [0, 1)");
  if (kind == TaskKind::kClassification) {
    if (classes < 2) throw InvalidArgument("synthetic: need at least two classes");
    if (classes > width) {
      throw InvalidArgument("synthetic: K = " + std::to_string(classes) + " orthogonal class directions need d >= K (d = " +
                            std::to_string(width) + ")");
    }
  }
  const auto counts = split_counts();
  if (counts[0] == 0) throw InvalidArgument("synthetic: empty training split");
}

std::array<std::size_t, 3> SynthSpec::split_counts() const {
  if (train + validation + test > 0) return {train, validation, test};
  const auto n_train = static_cast<std::size_t>(std::llround(0.70 * static_cast<double>(examples)));
  const auto n_val = static_cast<std::size_t>(std::llround(0.15 * static_cast<double>(examples)));
  const std::size_t n_test = examples - std::min(examples, n_train + n_val);
  return {n_train, n_val, n_test};
}

TaskDataset generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  TaskDataset ds;
  ds.kind = spec.kind;
  ds.layers = spec.layers;
  ds.width = spec.width;
  ds.classes = spec.kind == TaskKind::kClassification ? spec.classes : 0;

  Rng data_rng(spec.seed, Stream::kData);
  Rng order_rng(spec.seed, Stream::kShuffle);
  const auto counts = spec.split_counts();

  // (split, label) slots; classification labels are assigned round-robin
  // within each split, which stratifies to within one example per class.
  std::vector<std::pair<Split, std::uint32_t>> slots;
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t i = 0; i < counts[s]; ++i) {
      const std::uint32_t label = spec.kind == TaskKind::kClassification ? static_cast<std::uint32_t>(i % spec.classes) : 0;
      slots.emplace_back(static_cast<Split>(s), label);
    }
  }
  order_rng.shuffle(slots);

  if (spec.kind == TaskKind::kClassification) {
    const auto directions = orthonormal_directions(data_rng, spec.classes, spec.width);
    for (const auto& [split, label] : slots) {
      Example e;
      e.label = label;
      e.split = split;
      e.stack = planted_stack(spec, directions[label], data_rng);
      ds.examples.push_back(std::move(e));
    }
  } else {
    for (const auto& [split, unused] : slots) {
      (void)unused;
      const double c = data_rng.uniform(-1.0, 1.0);
      const std::vector<double> a = random_unit(data_rng, spec.width);
      std::vector<double> b(spec.width);
      if (spec.width == 1) {
        b[0] = c >= 0.0 ? a[0] : -a[0];
      } else {
        std::vector<double> r = random_unit(data_rng, spec.width);
        const double dot = std::inner_product(r.begin(), r.end(), a.begin(), 0.0);
        for (std::size_t j = 0; j < spec.width; ++j) r[j] -= dot * a[j];
        const double rn = std::sqrt(std::inner_product(r.begin(), r.end(), r.begin(), 0.0));
        const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
        for (std::size_t j = 0; j < spec.width; ++j) b[j] = c * a[j] + s * r[j] / rn;
      }
      Example e;
      e.split = split;
      e.gold = round_f32((1.0 + c) / 2.0);
      e.stack = planted_stack(spec, a, data_rng);
      e.pair = planted_stack(spec, b, data_rng);
      ds.examples.push_back(std::move(e));
    }
  }
  return ds;
}

TaskDataset few_shot_subset(const TaskDataset& ds, std::size_t per_label, std::uint64_t seed) {
  if (ds.kind != TaskKind::kClassification) throw InvalidArgument("few_shot_subset: defined for classification only");
  if (per_label == 0) throw InvalidArgument("few_shot_subset: k must be at least 1");
  std::vector<std::vector<std::size_t>> by_class(ds.classes);
  for (std::size_t i : ds.indices(Split::kTrain)) by_class[ds.examples[i].label].push_back(i);
  std::vector<bool> keep(ds.examples.size(), false);
  for (std::uint32_t c = 0; c < ds.classes; ++c) {
    Rng rng(seed, Stream::kSampling, c);
    rng.shuffle(by_class[c]);
    const std::size_t take = std::min(per_label, by_class[c].size());
    for (std::size_t i = 0; i < take; ++i) keep[by_class[c][i]] = true;
  }
  TaskDataset out;
  out.kind = ds.kind;
  out.layers = ds.layers;
  out.width = ds.width;
  out.classes = ds.classes;
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    if (ds.examples[i].split != Split::kTrain || keep[i]) out.examples.push_back(ds.examples[i]);
  }
  return out;
}

}  // namespace ilse
