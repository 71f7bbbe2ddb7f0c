#pragma once

#include <cstddef>
#include <span>

#include "ilse/encoders.hpp"

namespace ilse {

// Row `layer` of every stack in the batch; no parameters. Covers Last-Layer
// (layer = L - 1) and Best-Layer (layer = selected).
class LayerSelectEncoder final : public Encoder {
 public:
  LayerSelectEncoder(std::size_t layers, std::size_t width, std::size_t layer);
  void init(ParamStore&, Rng&) const override {}
  Var encode(Var rows, std::size_t batch, ParamStore& store, Rng* dropout_rng) const override;
  std::size_t output_width() const override { return width_; }
  std::size_t param_count() const override { return 0; }

 private:
  std::size_t layers_, width_, layer_;
};

// softmax(logits)-weighted sum of the rows; exactly L parameters.
class WeightedEncoder final : public Encoder {
 public:
  WeightedEncoder(std::size_t layers, std::size_t width);
  void init(ParamStore& store, Rng& rng) const override;
  Var encode(Var rows, std::size_t batch, ParamStore& store, Rng* dropout_rng) const override;
  std::size_t output_width() const override { return width_; }
  std::size_t param_count() const override { return layers_; }

 private:
  std::size_t layers_, width_;
};

// d -> w -> w MLP (ReLU) on one chosen row.
class MlpEncoder final : public Encoder {
 public:
  MlpEncoder(std::size_t layers, std::size_t width, std::size_t layer, const MethodConfig& config);
  void init(ParamStore& store, Rng& rng) const override { mlp_.init(store, rng); }
  Var encode(Var rows, std::size_t batch, ParamStore& store, Rng* dropout_rng) const override;
  std::size_t output_width() const override { return mlp_.out(); }
  std::size_t param_count() const override { return mlp_.param_count(); }

 private:
  LayerSelectEncoder select_;
  Mlp mlp_;
};

// Depth-wise attention over projected layers. Every row is projected to w;
// the projected last row gives the query, keys are learned per-layer
// positional vectors, values are an MLP of each projected row. Output is the
// projected last row plus the attention-weighted values.
class DwattEncoder final : public Encoder {
 public:
  DwattEncoder(std::size_t layers, std::size_t width, const MethodConfig& config);
  void init(ParamStore& store, Rng& rng) const override;
  Var encode(Var rows, std::size_t batch, ParamStore& store, Rng* dropout_rng) const override;
  std::size_t output_width() const override { return hidden_; }
  std::size_t param_count() const override;

  // B x L attention weights; recorded on the same tape as encode().
  Var attention(Var rows, std::size_t batch, ParamStore& store) const;

 private:
  Var projected_last(Var projected, std::size_t batch) const;

  std::size_t layers_, hidden_;
  Linear projection_;
  Linear query_;
  Mlp value_;
};

// Single-stack conveniences.
Tensor last_layer_encode(const LayerStack& stack);
Tensor weighted_encode(const LayerStack& stack, std::span<const double> logits);
// Uses config.method (kMlpLast / kMlpBest) and config.selected_layer. Throws
// InvalidState for kMlpBest without a selected layer.
Tensor mlp_encode(const LayerStack& stack, ParamStore& params, const MethodConfig& config);
Tensor dwatt_encode(const LayerStack& stack, ParamStore& params, const MethodConfig& config);

}  // namespace ilse
