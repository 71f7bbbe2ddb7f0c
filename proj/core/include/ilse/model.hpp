#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>

#include "ilse/baselines.hpp"
#include "ilse/dataset.hpp"
#include "ilse/encoders.hpp"

namespace ilse {

// Builds the encoder for a method. Cayley encoders get a graph over
// smallest_n_for(L) and a layer assignment drawn from `seed`.
std::unique_ptr<Encoder> make_encoder(const MethodConfig& config, std::size_t layers, std::size_t width,
                                      std::uint64_t seed);

// Trainable scalars of the encoder alone (the task head is not included).
// Best-layer kinds count as if a layer were selected.
std::size_t count_params(const MethodConfig& config, std::size_t layers, std::size_t width);
// Scalars in the task head: a linear w -> K map for classification, none for
// pair regression (pairs are scored by cosine of encoder outputs).
std::size_t count_head_params(const MethodConfig& config, std::size_t layers, std::size_t width, TaskKind kind,
                              std::uint32_t classes);

// Encoder plus optional classification head, owning its parameters.
class Model {
 public:
  Model(const MethodConfig& config, TaskKind kind, std::size_t layers, std::size_t width, std::uint32_t classes,
        std::uint64_t seed);

  // B x w representation of a (B*L) x d batch.
  Var represent(Var rows, std::size_t batch, Rng* dropout_rng);
  // B x K logits; classification only.
  Var logits(Var rows, std::size_t batch, Rng* dropout_rng);

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const Encoder& encoder() const { return *encoder_; }
  const MethodConfig& config() const { return config_; }
  TaskKind kind() const { return kind_; }
  std::size_t layers() const { return layers_; }
  std::size_t width() const { return width_; }
  std::size_t encoder_param_count() const { return encoder_->param_count(); }
  std::size_t head_param_count() const { return head_ ? head_->param_count() : 0; }
  bool trainable() const { return !params_.empty(); }

 private:
  MethodConfig config_;
  TaskKind kind_;
  std::size_t layers_;
  std::size_t width_;
  std::unique_ptr<Encoder> encoder_;
  std::optional<Linear> head_;
  ParamStore params_;
};

}  // namespace ilse
