#include "ilse/tensor.hpp"

#include <cmath>
#include <sstream>

#include "ilse/errors.hpp"

namespace ilse {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  return n;
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_product(shape_)) {
    throw InvalidArgument("Tensor: data length " + std::to_string(data_.size()) +
                          " does not match shape " + shape_string());
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw InvalidArgument("Tensor::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

std::size_t Tensor::rows() const {
  if (shape_.size() <= 1) return 1;
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.empty()) return 1;
  if (shape_.size() == 1) return shape_[0];
  return shape_[1];
}

void Tensor::fill(double v) {
  for (double& x : data_) x = v;
}

bool Tensor::all_finite() const {
  // x - x is 0 for finite x and NaN for infinities and NaNs; the branchless
  // reduction vectorizes.
  bool ok = true;
  for (double x : data_) ok &= (x - x == 0.0);
  return ok;
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
  os << ']';
  return os.str();
}

namespace kernels {

// On x86-64 the kernels also get an AVX2 clone picked at load time. AVX2
// without FMA keeps every element's operation sequence identical to the
// baseline clone, so results are bit-identical whichever clone runs.
#if defined(__x86_64__) && defined(__GNUC__) && !defined(__SANITIZE_ADDRESS__)
#define ILSE_KERNEL __attribute__((target_clones("avx2", "default")))
#else
#define ILSE_KERNEL
#endif

namespace {

// C[i, :] += A[i, :] * B, consuming k in groups of eight rows of B. The
// grouping depends only on k, never on i, so a row's result does not depend
// on its position in A.
ILSE_KERNEL void nn_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* __restrict ci = c + i * n;
    std::size_t p = 0;
    for (; p + 8 <= k; p += 8) {
      double s[8];
      for (std::size_t q = 0; q < 8; ++q) s[q] = ai[p + q];
      if (s[0] == 0.0 && s[1] == 0.0 && s[2] == 0.0 && s[3] == 0.0 && s[4] == 0.0 && s[5] == 0.0 &&
          s[6] == 0.0 && s[7] == 0.0) {
        continue;
      }
      const double* __restrict b0 = b + p * n;
      const double* __restrict b1 = b0 + n;
      const double* __restrict b2 = b1 + n;
      const double* __restrict b3 = b2 + n;
      const double* __restrict b4 = b3 + n;
      const double* __restrict b5 = b4 + n;
      const double* __restrict b6 = b5 + n;
      const double* __restrict b7 = b6 + n;
      for (std::size_t j = 0; j < n; ++j) {
        ci[j] += ((s[0] * b0[j] + s[1] * b1[j]) + (s[2] * b2[j] + s[3] * b3[j])) +
                 ((s[4] * b4[j] + s[5] * b5[j]) + (s[6] * b6[j] + s[7] * b7[j]));
      }
    }
    for (; p < k; ++p) {
      const double sp = ai[p];
      if (sp == 0.0) continue;
      const double* __restrict bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += sp * bp[j];
    }
  }
}

}  // namespace

ILSE_KERNEL void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m * n; ++i) c[i] = 0.0;
  nn_acc(a, b, c, m, k, n);
}

ILSE_KERNEL void matmul_nt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  std::vector<double> bt(n * k);
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
  }
  nn_acc(a, bt.data(), c, m, n, k);
}

ILSE_KERNEL void matmul_tn_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= m; i += 8) {
    const double* a0 = a + i * k;
    const double* __restrict b0 = b + i * n;
    const double* __restrict b1 = b0 + n;
    const double* __restrict b2 = b1 + n;
    const double* __restrict b3 = b2 + n;
    const double* __restrict b4 = b3 + n;
    const double* __restrict b5 = b4 + n;
    const double* __restrict b6 = b5 + n;
    const double* __restrict b7 = b6 + n;
    for (std::size_t p = 0; p < k; ++p) {
      double s[8];
      bool any = false;
      for (std::size_t q = 0; q < 8; ++q) {
        s[q] = a0[q * k + p];
        any = any || s[q] != 0.0;
      }
      if (!any) continue;
      double* __restrict cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        cp[j] += ((s[0] * b0[j] + s[1] * b1[j]) + (s[2] * b2[j] + s[3] * b3[j])) +
                 ((s[4] * b4[j] + s[5] * b5[j]) + (s[6] * b6[j] + s[7] * b7[j]));
      }
    }
  }
  for (; i < m; ++i) {
    const double* ai = a + i * k;
    const double* __restrict bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = ai[p];
      if (s == 0.0) continue;
      double* __restrict cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += s * bi[j];
    }
  }
}

}  // namespace kernels
}  // namespace ilse
