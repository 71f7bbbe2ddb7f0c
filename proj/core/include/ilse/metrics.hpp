#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ilse {

// Fractional ranks (1-based); ties share the average of their positions.
std::vector<double> fractional_ranks(std::span<const double> xs);

// Throws UndefinedCorrelation when either side is constant and
// InvalidArgument on length mismatch or fewer than two points.
double pearson(std::span<const double> xs, std::span<const double> ys);
// Pearson correlation of fractional ranks.
double spearman(std::span<const double> xs, std::span<const double> ys);

double accuracy(std::span<const std::uint32_t> predicted, std::span<const std::uint32_t> gold);

}  // namespace ilse
