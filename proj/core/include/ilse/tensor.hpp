#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ilse {

// Dense row-major tensor of doubles. Rank 1 and rank 2 are the workhorses;
// a rank-1 tensor of length n behaves as a 1 x n matrix for rows()/cols().
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor vector(std::size_t n, double fill = 0.0) { return Tensor({n}, fill); }
  static Tensor scalar(double v) { return Tensor({}, std::vector<double>{v}); }
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* raw() { return data_.data(); }
  const double* raw() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

  void fill(double v);
  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_string() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);

namespace kernels {
// C = A(m x k) * B(k x n). Each output element accumulates over k in index
// order, so a row's result does not depend on its position in A.
void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n);
// C += A(m x n) * B(k x n)^T
void matmul_nt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                   std::size_t n);
// C += A(m x k)^T * B(m x n)
void matmul_tn_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                   std::size_t n);
}  // namespace kernels

}  // namespace ilse
