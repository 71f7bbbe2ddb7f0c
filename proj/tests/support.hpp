#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "ilse/autodiff.hpp"
#include "ilse/encoders.hpp"
#include "ilse/model.hpp"
#include "ilse/layer_stack.hpp"
#include "ilse/param_store.hpp"
#include "ilse/rng.hpp"
#include "ilse/tensor.hpp"

namespace ilse::test {

inline Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.data()) v = scale * rng.normal();
  return t;
}

inline LayerStack random_stack(std::size_t layers, std::size_t width, Rng& rng) {
  return LayerStack(random_matrix(layers, width, rng));
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Largest |a - b| / max(1, |b|) over all elements.
inline double max_rel_diff(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i])));
  return m;
}

struct GradReport {
  double worst = 0.0;  // largest relative error over all parameter tensors
  std::string where;
};

// Relative error ||a - n|| / max(||a||, ||n||) per parameter tensor. Below a
// gradient norm of 1e-6 the comparison becomes absolute, which keeps
// vanishing gradients (finite differences there are pure rounding noise)
// from dominating.
inline double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-6});
}

// Compares reverse-mode gradients of every parameter in `store` with central
// finite differences. `loss` must be a pure function of the store values: it
// is called once per perturbation on a fresh tape.
inline GradReport check_gradients(ParamStore& store, const std::function<Var(Tape&)>& loss, bool training = false,
                                  double eps = 1e-5) {
  store.zero_grad();
  {
    Tape tape(training);
    Var l = loss(tape);
    tape.backward(l);
  }
  std::vector<Tensor> analytic;
  for (const auto& e : store.entries()) analytic.push_back(e.grad);

  auto eval = [&] {
    Tape tape(training);
    Var l = loss(tape);
    return tape.value(l)[0];
  };

  GradReport report;
  for (std::size_t p = 0; p < store.entries().size(); ++p) {
    Tensor& value = store.entries()[p].value;
    std::vector<double> numeric(value.size());
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + eps;
      const double up = eval();
      value[i] = saved - eps;
      const double down = eval();
      value[i] = saved;
      numeric[i] = (up - down) / (2.0 * eps);
    }
    const double err = relative_error(analytic[p].data(), numeric);
    if (report.where.empty() || err > report.worst) {
      report.worst = err;
      report.where = store.entries()[p].name;
    }
  }
  store.zero_grad();
  return report;
}

// Replaces every parameter with N(0, 0.5^2) draws so biases are exercised too.
inline void randomize(ParamStore& store, std::uint64_t seed) {
  Rng rng(seed, Stream::kData, 7);
  for (auto& e : store.entries()) {
    for (double& v : e.value.data()) v = 0.5 * rng.normal();
  }
}

inline MethodConfig config_for(const std::string& name, std::size_t hidden, int mpnn, int depth) {
  MethodConfig c = parse_method(name);
  c.hidden = hidden;
  c.mpnn_layers = mpnn;
  c.gin_mlp_depth = depth;
  return c;
}

struct GradCase {
  const char* method;
  int mpnn;
  int depth;
};

// Finite-difference check of a full Model (encoder + head / cosine loss) on
// `seeds` random small shapes: L in [2, 6], d in [2, 8], batch 2-3.
inline void gradient_suite(const GradCase& gc, TaskKind kind, int seeds, double tol) {
  for (int seed = 0; seed < seeds; ++seed) {
    const auto s = static_cast<std::uint64_t>(seed);
    Rng rng(s, Stream::kData, 1);
    const std::size_t layers = 2 + rng.below(5);  // 2..6
    const std::size_t width = 2 + rng.below(7);   // 2..8
    const std::size_t batch = 2 + rng.below(2);
    const std::uint32_t classes = 3;
    MethodConfig cfg = config_for(gc.method, 5, gc.mpnn, gc.depth);
    if (cfg.method == Method::kMlpBest || cfg.method == Method::kBestLayer) cfg.selected_layer = layers / 2;
    Model model(cfg, kind, layers, width, classes, s);
    randomize(model.params(), s + 1000);
    const Tensor a = random_matrix(batch * layers, width, rng);
    const Tensor b = random_matrix(batch * layers, width, rng);
    std::vector<std::uint32_t> labels(batch);
    std::vector<double> gold(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      labels[i] = static_cast<std::uint32_t>(rng.below(classes));
      gold[i] = rng.uniform();
    }
    auto loss = [&](Tape& t) {
      if (kind == TaskKind::kClassification) return ops::cross_entropy(model.logits(t.constant(a), batch, nullptr), labels);
      return ops::cosine_mse(model.represent(t.constant(a), batch, nullptr),
                             model.represent(t.constant(b), batch, nullptr), gold);
    };
    const GradReport r = check_gradients(model.params(), loss);
    EXPECT_LT(r.worst, tol) << gc.method << " " << to_string(kind) << " seed " << seed << " L=" << layers
                            << " d=" << width << ": " << r.worst << " at " << r.where;
  }
}

// ---- straight-line dense math used as oracles -------------------------------

inline Tensor dense_matmul(const Tensor& a, const Tensor& b) {
  Tensor c = Tensor::matrix(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double s = 0.0L;
      for (std::size_t p = 0; p < a.cols(); ++p) s += static_cast<long double>(a(i, p)) * b(p, j);
      c(i, j) = static_cast<double>(s);
    }
  }
  return c;
}

inline Tensor dense_linear(const Tensor& x, const ParamStore& store, const std::string& prefix) {
  Tensor y = dense_matmul(x, store.value(prefix + ".w"));
  const Tensor& b = store.value(prefix + ".b");
  for (std::size_t i = 0; i < y.rows(); ++i) {
    for (std::size_t j = 0; j < y.cols(); ++j) y(i, j) += b[j];
  }
  return y;
}

inline Tensor dense_relu(Tensor x) {
  for (double& v : x.data()) v = v > 0.0 ? v : 0.0;
  return x;
}

// Chain of `count` linear layers "<prefix>.0" ... with ReLU between them.
inline Tensor dense_mlp(Tensor x, const ParamStore& store, const std::string& prefix, std::size_t count,
                        bool activate_output = false) {
  for (std::size_t i = 0; i < count; ++i) {
    x = dense_linear(x, store, prefix + "." + std::to_string(i));
    if (i + 1 < count || activate_output) x = dense_relu(std::move(x));
  }
  return x;
}

inline Tensor row_of(const Tensor& m, std::size_t r) {
  Tensor out = Tensor::matrix(1, m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j) out(0, j) = m(r, j);
  return out;
}

inline Tensor flatten(const Tensor& m) {
  return Tensor({m.size()}, std::vector<double>(m.data().begin(), m.data().end()));
}

}  // namespace ilse::test
