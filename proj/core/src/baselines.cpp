#include "ilse/baselines.hpp"

#include <cmath>

#include "ilse/errors.hpp"

namespace ilse {
namespace {

void check_rows(const Var& rows, std::size_t batch, std::size_t layers, std::size_t width, const char* who) {
  const Tensor& rv = rows.tape->value(rows);
  if (rv.rows() != batch * layers || rv.cols() != width) {
    throw InvalidArgument(std::string(who) + ": expected " + std::to_string(batch * layers) + " x " +
                          std::to_string(width) + " rows, got " + rv.shape_string());
  }
}

std::shared_ptr<RowMix> select_mix(std::size_t batch, std::size_t layers, std::size_t layer) {
  auto mix = std::make_shared<RowMix>();
  mix->input_rows = batch * layers;
  mix->rows.resize(batch);
  for (std::size_t b = 0; b < batch; ++b) mix->rows[b].push_back({static_cast<std::uint32_t>(b * layers + layer), 1.0});
  return mix;
}

std::size_t resolve_layer(std::size_t layers, const MethodConfig& config) {
  if (config.method == Method::kMlpBest || config.method == Method::kBestLayer) {
    if (!config.selected_layer) throw InvalidState(method_name(config) + ": selected layer has not been set");
    if (*config.selected_layer >= layers) throw InvalidArgument(method_name(config) + ": selected layer out of range");
    return *config.selected_layer;
  }
  return layers - 1;
}

Tensor run_single(const Encoder& encoder, const LayerStack& stack, ParamStore& params) {
  Tape tape(false);
  const Tensor& v = tape.value(encoder.encode(tape.constant(stack.matrix()), 1, params, nullptr));
  return Tensor({v.cols()}, std::vector<double>(v.data().begin(), v.data().end()));
}

}  // namespace

LayerSelectEncoder::LayerSelectEncoder(std::size_t layers, std::size_t width, std::size_t layer)
    : layers_(layers), width_(width), layer_(layer) {
  if (layer >= layers) throw InvalidArgument("layer select: layer " + std::to_string(layer) + " out of range");
}

Var LayerSelectEncoder::encode(Var rows, std::size_t batch, ParamStore&, Rng*) const {
  check_rows(rows, batch, layers_, width_, "layer select");
  return ops::mix_rows(rows, select_mix(batch, layers_, layer_));
}

WeightedEncoder::WeightedEncoder(std::size_t layers, std::size_t width) : layers_(layers), width_(width) {
  if (layers == 0) throw InvalidArgument("weighted: no layers");
}

// Zero logits start from the plain mean.
void WeightedEncoder::init(ParamStore& store, Rng&) const { store.add("weighted.logits", Tensor::matrix(1, layers_)); }

Var WeightedEncoder::encode(Var rows, std::size_t batch, ParamStore& store, Rng*) const {
  check_rows(rows, batch, layers_, width_, "weighted");
  Var weights = ops::softmax(rows.tape->parameter(store, "weighted.logits"));
  return ops::attend(weights, rows, layers_);
}

MlpEncoder::MlpEncoder(std::size_t layers, std::size_t width, std::size_t layer, const MethodConfig& config)
    : select_(layers, width, layer), mlp_("mlp", {width, config.hidden, config.hidden}, false, config.dropout) {}

Var MlpEncoder::encode(Var rows, std::size_t batch, ParamStore& store, Rng* dropout_rng) const {
  return mlp_.forward(select_.encode(rows, batch, store, nullptr), store, dropout_rng);
}

DwattEncoder::DwattEncoder(std::size_t layers, std::size_t width, const MethodConfig& config)
    : layers_(layers),
      hidden_(config.hidden),
      projection_{"dwatt.proj", width, config.hidden},
      query_{"dwatt.query", config.hidden, config.hidden},
      value_("dwatt.value", {config.hidden, config.hidden, config.hidden}, false, config.dropout) {
  if (layers == 0) throw InvalidArgument("dwatt: no layers");
}

void DwattEncoder::init(ParamStore& store, Rng& rng) const {
  projection_.init(store, rng);
  query_.init(store, rng);
  const double bound = std::sqrt(1.0 / static_cast<double>(hidden_));
  Tensor keys = Tensor::matrix(layers_, hidden_);
  for (double& v : keys.data()) v = rng.uniform(-bound, bound);
  store.add("dwatt.keys", std::move(keys));
  value_.init(store, rng);
}

std::size_t DwattEncoder::param_count() const {
  return projection_.param_count() + query_.param_count() + layers_ * hidden_ + value_.param_count();
}

Var DwattEncoder::projected_last(Var projected, std::size_t batch) const {
  return ops::mix_rows(projected, select_mix(batch, layers_, layers_ - 1));
}

Var DwattEncoder::attention(Var rows, std::size_t batch, ParamStore& store) const {
  check_rows(rows, batch, layers_, projection_.in, "dwatt");
  Var projected = projection_.forward(rows, store);
  Var q = query_.forward(projected_last(projected, batch), store);
  Var keys = rows.tape->parameter(store, "dwatt.keys");
  Var scores = ops::scale(ops::matmul(q, ops::transpose(keys)), 1.0 / std::sqrt(static_cast<double>(hidden_)));
  return ops::softmax(scores);
}

Var DwattEncoder::encode(Var rows, std::size_t batch, ParamStore& store, Rng* dropout_rng) const {
  check_rows(rows, batch, layers_, projection_.in, "dwatt");
  Var projected = projection_.forward(rows, store);
  Var last = projected_last(projected, batch);
  Var q = query_.forward(last, store);
  Var keys = rows.tape->parameter(store, "dwatt.keys");
  Var scores = ops::scale(ops::matmul(q, ops::transpose(keys)), 1.0 / std::sqrt(static_cast<double>(hidden_)));
  Var alpha = ops::softmax(scores);
  Var values = value_.forward(projected, store, dropout_rng);
  return ops::add(last, ops::attend(alpha, values, layers_));
}

Tensor last_layer_encode(const LayerStack& stack) {
  if (stack.layers() == 0) throw InvalidArgument("last_layer_encode: empty stack");
  auto row = stack.row(stack.layers() - 1);
  return Tensor({row.size()}, std::vector<double>(row.begin(), row.end()));
}

Tensor weighted_encode(const LayerStack& stack, std::span<const double> logits) {
  if (logits.size() != stack.layers()) throw InvalidArgument("weighted_encode: one weight per layer required");
  WeightedEncoder encoder(stack.layers(), stack.width());
  ParamStore store;
  store.add("weighted.logits", Tensor({1, logits.size()}, std::vector<double>(logits.begin(), logits.end())));
  return run_single(encoder, stack, store);
}

Tensor mlp_encode(const LayerStack& stack, ParamStore& params, const MethodConfig& config) {
  if (config.method != Method::kMlpLast && config.method != Method::kMlpBest) {
    throw InvalidArgument("mlp_encode: config is not an MLP baseline");
  }
  MlpEncoder encoder(stack.layers(), stack.width(), resolve_layer(stack.layers(), config), config);
  return run_single(encoder, stack, params);
}

Tensor dwatt_encode(const LayerStack& stack, ParamStore& params, const MethodConfig& config) {
  return run_single(DwattEncoder(stack.layers(), stack.width(), config), stack, params);
}

}  // namespace ilse
