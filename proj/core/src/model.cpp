#include "ilse/model.hpp"

#include "ilse/errors.hpp"

namespace ilse {

std::unique_ptr<Encoder> make_encoder(const MethodConfig& config, std::size_t layers, std::size_t width,
                                      std::uint64_t seed) {
  config.validate();
  if (layers == 0 || width == 0) throw InvalidArgument("encoder: L and d must be positive");
  switch (config.method) {
    case Method::kLastLayer:
      return std::make_unique<LayerSelectEncoder>(layers, width, layers - 1);
    case Method::kBestLayer:
      if (!config.selected_layer) throw InvalidState("best_layer: selected layer has not been set");
      return std::make_unique<LayerSelectEncoder>(layers, width, *config.selected_layer);
    case Method::kWeighted:
      return std::make_unique<WeightedEncoder>(layers, width);
    case Method::kMlpLast:
      return std::make_unique<MlpEncoder>(layers, width, layers - 1, config);
    case Method::kMlpBest:
      if (!config.selected_layer) throw InvalidState("mlp_best: selected layer has not been set");
      return std::make_unique<MlpEncoder>(layers, width, *config.selected_layer, config);
    case Method::kDwatt:
      return std::make_unique<DwattEncoder>(layers, width, config);
    case Method::kSet:
      return std::make_unique<SetEncoder>(layers, width, config);
    case Method::kFc:
      return std::make_unique<GraphEncoder>(GraphEncoder::fully_connected(layers, width, config));
    case Method::kCayley: {
      const auto size = smallest_n_for(layers);
      auto graph = std::make_shared<const CayleyGraph>(CayleyGraph::build(static_cast<std::int64_t>(size.n)));
      return std::make_unique<GraphEncoder>(
          GraphEncoder::cayley(layers, width, config, assign_layers(layers, std::move(graph), seed)));
    }
  }
  throw InvalidArgument("unknown method");
}

namespace {
MethodConfig with_selection(MethodConfig config) {
  if (!config.selected_layer) config.selected_layer = 0;
  return config;
}
}  // namespace

std::size_t count_params(const MethodConfig& config, std::size_t layers, std::size_t width) {
  return make_encoder(with_selection(config), layers, width, 0)->param_count();
}

std::size_t count_head_params(const MethodConfig& config, std::size_t layers, std::size_t width, TaskKind kind,
                              std::uint32_t classes) {
  if (kind != TaskKind::kClassification) return 0;
  const std::size_t out = make_encoder(with_selection(config), layers, width, 0)->output_width();
  return out * classes + classes;
}

Model::Model(const MethodConfig& config, TaskKind kind, std::size_t layers, std::size_t width, std::uint32_t classes,
             std::uint64_t seed)
    : config_(config), kind_(kind), layers_(layers), width_(width), encoder_(make_encoder(config, layers, width, seed)) {
  Rng init_rng(seed, Stream::kInit);
  encoder_->init(params_, init_rng);
  if (kind == TaskKind::kClassification) {
    if (classes < 2) throw InvalidArgument("model: classification needs at least two classes");
    head_ = Linear{"head", encoder_->output_width(), classes};
    head_->init(params_, init_rng);
  }
}

Var Model::represent(Var rows, std::size_t batch, Rng* dropout_rng) {
  return encoder_->encode(rows, batch, params_, dropout_rng);
}

Var Model::logits(Var rows, std::size_t batch, Rng* dropout_rng) {
  if (!head_) throw InvalidState("model: logits requested for a pair-regression model");
  return head_->forward(represent(rows, batch, dropout_rng), params_);
}

}  // namespace ilse
