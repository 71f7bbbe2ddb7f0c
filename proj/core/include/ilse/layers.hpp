#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ilse/autodiff.hpp"

namespace ilse {

enum class Mode { kTrain, kEval };

// Dense layer y = x W + b with W stored in x in-by-out layout. Parameters are
// named "<prefix>.w" and "<prefix>.b".
struct Linear {
  std::string prefix;
  std::size_t in = 0;
  std::size_t out = 0;

  // W ~ U(-sqrt(1/in), sqrt(1/in)), b = 0.
  void init(ParamStore& store, Rng& rng) const;
  Var forward(Var x, ParamStore& store) const;
  std::size_t param_count() const { return in * out + out; }
};

// Chain of Linear layers with ReLU between them. activate_output also applies
// ReLU after the last layer. Dropout (inverted) follows every ReLU when the
// tape is training.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::string prefix, std::vector<std::size_t> widths, bool activate_output = false, double dropout = 0.0);

  void init(ParamStore& store, Rng& rng) const;
  Var forward(Var x, ParamStore& store, Rng* dropout_rng = nullptr) const;

  const std::vector<std::size_t>& widths() const { return widths_; }
  const std::vector<Linear>& layers() const { return layers_; }
  std::size_t in() const { return widths_.front(); }
  std::size_t out() const { return widths_.back(); }
  std::size_t param_count() const;
  double dropout() const { return dropout_; }

 private:
  std::string prefix_;
  std::vector<std::size_t> widths_;
  std::vector<Linear> layers_;
  bool activate_output_ = false;
  double dropout_ = 0.0;
};

}  // namespace ilse
