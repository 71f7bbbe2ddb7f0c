#include "ilse/layers.hpp"

#include <cmath>

#include "ilse/errors.hpp"

namespace ilse {

void Linear::init(ParamStore& store, Rng& rng) const {
  if (in == 0 || out == 0) throw InvalidArgument("Linear '" + prefix + "': zero width");
  const double bound = std::sqrt(1.0 / static_cast<double>(in));
  Tensor w = Tensor::matrix(in, out);
  for (double& v : w.data()) v = rng.uniform(-bound, bound);
  store.add(prefix + ".w", std::move(w));
  store.add(prefix + ".b", Tensor::vector(out));
}

Var Linear::forward(Var x, ParamStore& store) const {
  Tape& t = *x.tape;
  return ops::add_bias(ops::matmul(x, t.parameter(store, prefix + ".w")), t.parameter(store, prefix + ".b"));
}

Mlp::Mlp(std::string prefix, std::vector<std::size_t> widths, bool activate_output, double dropout)
    : prefix_(std::move(prefix)), widths_(std::move(widths)), activate_output_(activate_output), dropout_(dropout) {
  if (widths_.size() < 2) throw InvalidArgument("Mlp '" + prefix_ + "': need at least input and output widths");
  if (dropout_ < 0.0 || dropout_ >= 1.0) throw InvalidArgument("Mlp '" + prefix_ + "': dropout must be in [0, 1)");
  for (std::size_t i = 0; i + 1 < widths_.size(); ++i) {
    layers_.push_back(Linear{prefix_ + "." + std::to_string(i), widths_[i], widths_[i + 1]});
  }
}

void Mlp::init(ParamStore& store, Rng& rng) const {
  for (const Linear& l : layers_) l.init(store, rng);
}

Var Mlp::forward(Var x, ParamStore& store, Rng* dropout_rng) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i].forward(x, store);
    const bool last = i + 1 == layers_.size();
    if (!last || activate_output_) {
      x = ops::relu(x);
      if (dropout_ > 0.0 && dropout_rng != nullptr) x = ops::dropout(x, dropout_, *dropout_rng);
    }
  }
  return x;
}

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (const Linear& l : layers_) n += l.param_count();
  return n;
}

}  // namespace ilse
