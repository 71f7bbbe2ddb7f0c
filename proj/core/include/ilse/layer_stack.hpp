#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ilse/tensor.hpp"

namespace ilse {

// Pooled per-layer representations of one input: an L x d matrix whose row l
// is the mean over tokens of layer l's hidden states.
class LayerStack {
 public:
  LayerStack() = default;
  LayerStack(std::size_t layers, std::size_t width, double fill = 0.0);
  explicit LayerStack(Tensor matrix);

  std::size_t layers() const { return matrix_.rows(); }
  std::size_t width() const { return matrix_.cols(); }
  std::span<double> row(std::size_t l) { return matrix_.row(l); }
  std::span<const double> row(std::size_t l) const { return matrix_.row(l); }
  double& at(std::size_t l, std::size_t j) { return matrix_(l, j); }
  double at(std::size_t l, std::size_t j) const { return matrix_(l, j); }

  const Tensor& matrix() const { return matrix_; }
  Tensor& matrix() { return matrix_; }

  friend bool operator==(const LayerStack&, const LayerStack&) = default;

 private:
  Tensor matrix_;
};

// Mean over the T rows of a T x d token matrix. Throws InvalidArgument for T == 0.
Tensor mean_pool_tokens(const Tensor& hidden);

// Stacks B layer stacks of identical shape into a (B*L) x d matrix.
Tensor batch_rows(std::span<const LayerStack* const> stacks);

}  // namespace ilse
