#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ilse/param_store.hpp"
#include "ilse/rng.hpp"
#include "ilse/tensor.hpp"

namespace ilse {

class Tape;

// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;
};

// Records a finite sequence of ops and replays it in reverse to accumulate
// exact gradients. One Tape per forward pass; parameters are read from and
// their gradients written back to a ParamStore.
class Tape {
 public:
  explicit Tape(bool training = false) : training_(training) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool training() const { return training_; }

  Var constant(Tensor value);
  Var parameter(ParamStore& store, const std::string& name);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  // Only valid after backward() and for nodes that require a gradient.
  const Tensor& grad(Var v) const { return nodes_[v.id].grad; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  // Seeds d(loss)/d(loss) = 1 and accumulates into every parameter gradient.
  // loss must hold exactly one element.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // Low-level op recording. inputs decide requires_grad; backward is invoked
  // with the tape and the output node id once its gradient is final.
  using BackwardFn = std::function<void(Tape&, std::uint32_t)>;
  Var record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);

  // Gradient buffer of a node, allocated on first touch. Used by op backward
  // functions to accumulate into their inputs.
  Tensor& grad_buffer(std::uint32_t id);
  const Tensor& node_value(std::uint32_t id) const { return nodes_[id].value; }
  const Tensor& node_grad(std::uint32_t id) const { return nodes_[id].grad; }
  bool node_requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    Tensor* param_grad = nullptr;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  bool training_;
};

// Linear row mixing: out[r] = sum_k w_k * x[src_k]. Each output element is
// summed over its terms in ascending value order, so the result does not
// depend on the order terms are listed in. This is what makes set/FC
// readouts bitwise permutation invariant.
struct RowMix {
  struct Term {
    std::uint32_t source;
    double weight;
  };
  std::size_t input_rows = 0;
  std::vector<std::vector<Term>> rows;
};

namespace ops {

Var matmul(Var a, Var b);
// x (m x n) + bias (n) broadcast over rows.
Var add_bias(Var x, Var bias);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double factor);
// factor * x + offset, elementwise.
Var affine(Var x, double factor, double offset);
Var square(Var x);
Var relu(Var x);
Var log(Var x);
// Inverted dropout; identity when the tape is not training or rate == 0.
Var dropout(Var x, double rate, Rng& rng);
Var transpose(Var x);
// Scalar sum / mean of every element.
Var sum(Var x);
Var mean(Var x);
// Row-wise softmax.
Var softmax(Var x);
// Concatenate along columns (axis 1) or rows (axis 0).
Var concat(std::span<const Var> parts, int axis);
// Rows [begin, end).
Var slice_rows(Var x, std::size_t begin, std::size_t end);
Var mix_rows(Var x, std::shared_ptr<const RowMix> mix);
Var mix_rows(Var x, const RowMix& mix);
// Row-wise cosine similarity of two m x n matrices -> m-vector.
Var cosine(Var a, Var b);
// out[b] = sum_j alpha[b', j] * values[b * group + j], with b' = 0 when alpha
// has one row (shared weights) and b otherwise.
Var attend(Var alpha, Var values, std::size_t group);
// Mean cross-entropy of row-wise logits against class labels.
Var cross_entropy(Var logits, std::span<const std::uint32_t> labels);
// Mean over rows of ((1 + cos(u_r, v_r)) / 2 - gold_r)^2.
Var cosine_mse(Var u, Var v, std::span<const double> gold);

}  // namespace ops
}  // namespace ilse
