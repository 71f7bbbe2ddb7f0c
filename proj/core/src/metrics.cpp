#include "ilse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ilse/errors.hpp"

namespace ilse {

std::vector<double> fractional_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw InvalidArgument("correlation: length mismatch");
  if (xs.size() < 2) throw InvalidArgument("correlation: need at least two points");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelation("correlation undefined for constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw InvalidArgument("spearman: length mismatch");
  const auto rx = fractional_ranks(xs);
  const auto ry = fractional_ranks(ys);
  return pearson(rx, ry);
}

double accuracy(std::span<const std::uint32_t> predicted, std::span<const std::uint32_t> gold) {
  if (predicted.size() != gold.size()) throw InvalidArgument("accuracy: length mismatch");
  if (gold.empty()) throw InvalidArgument("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += predicted[i] == gold[i];
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

}  // namespace ilse
