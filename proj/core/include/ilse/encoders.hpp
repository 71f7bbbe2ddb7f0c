#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ilse/autodiff.hpp"
#include "ilse/cayley_graph.hpp"
#include "ilse/layer_stack.hpp"
#include "ilse/layers.hpp"

namespace ilse {

inline constexpr std::size_t kHiddenWidth = 256;

enum class Method {
  kLastLayer,
  kBestLayer,
  kWeighted,
  kMlpLast,
  kMlpBest,
  kDwatt,
  kSet,
  kFc,
  kCayley,
};

enum class Aggregation { kGin, kGcn };

// Architecture of one encoder or baseline. Fields irrelevant to a method are
// ignored (aggregation for set, selected_layer for cayley, ...).
struct MethodConfig {
  Method method = Method::kCayley;
  Aggregation aggregation = Aggregation::kGin;
  int mpnn_layers = 1;
  int gin_mlp_depth = 1;
  std::size_t hidden = kHiddenWidth;
  double dropout = 0.0;
  std::optional<std::size_t> selected_layer;

  void validate() const;
  bool is_graph() const { return method == Method::kFc || method == Method::kCayley; }
  bool is_ilse() const { return is_graph() || method == Method::kSet; }
};

// "cayley-gin", "fc-gcn", "set", "last_layer", "best_layer", "weighted",
// "mlp_last", "mlp_best", "dwatt". Hyphens and underscores are interchangeable
// on input.
std::string method_name(const MethodConfig& config);
MethodConfig parse_method(const std::string& name);

// Injective layer -> node map onto a (possibly larger) graph. Nodes that
// receive no layer are virtual: they start at zero and are left out of the
// readout.
struct NodeAssignment {
  std::shared_ptr<const CayleyGraph> graph;
  std::vector<std::uint32_t> layer_to_node;
  std::vector<bool> virtual_mask;

  std::size_t virtual_count() const;
  void validate(std::size_t layers) const;
};

// Seeded uniform injective assignment of `layers` layers onto graph nodes.
NodeAssignment assign_layers(std::size_t layers, std::shared_ptr<const CayleyGraph> graph, std::uint64_t seed);

// Row-mix structures over B disjoint copies of a graph.
// GIN: h_v + sum_{u in N(v)} h_u  (epsilon = 0)
RowMix gin_mix(const Graph& g, std::size_t batch);
// GCN: D^-1/2 (A + I) D^-1/2
RowMix gcn_mix(const Graph& g, std::size_t batch);

// A message-passing layer. GIN applies an MLP of `gin_mlp_depth` hidden
// layers (depth 0 = one linear map) to the summed neighbourhood; GCN applies
// a single linear map to the normalized aggregate. Neither applies an output
// activation; the encoder inserts ReLU between layers.
class MpnnLayer {
 public:
  MpnnLayer(std::string prefix, Aggregation aggregation, std::size_t in, std::size_t out, int gin_mlp_depth);
  void init(ParamStore& store, Rng& rng) const;
  Var forward(Var nodes, const RowMix& mix, ParamStore& store) const;
  Var forward(Var nodes, std::shared_ptr<const RowMix> mix, ParamStore& store) const;
  Aggregation aggregation() const { return aggregation_; }
  std::size_t param_count() const { return update_.param_count(); }

 private:
  Aggregation aggregation_;
  Mlp update_;
};

// Maps a batch of layer stacks, given as a (B*L) x d matrix, to a B x w
// representation.
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual void init(ParamStore& store, Rng& rng) const = 0;
  virtual Var encode(Var rows, std::size_t batch, ParamStore& store, Rng* dropout_rng) const = 0;
  virtual std::size_t output_width() const = 0;
  virtual std::size_t param_count() const = 0;
};

// rho(mean_l phi(z_l)), phi: d -> w (ReLU), rho: w -> w.
class SetEncoder final : public Encoder {
 public:
  SetEncoder(std::size_t layers, std::size_t width, const MethodConfig& config);
  void init(ParamStore& store, Rng& rng) const override;
  Var encode(Var rows, std::size_t batch, ParamStore& store, Rng* dropout_rng) const override;
  std::size_t output_width() const override { return rho_.out(); }
  std::size_t param_count() const override { return phi_.param_count() + rho_.param_count(); }

 private:
  std::size_t layers_;
  Mlp phi_;
  Mlp rho_;
};

// Input projection (d -> w, ReLU), scatter onto graph nodes (virtual nodes
// at zero), `mpnn_layers` message-passing layers, mean readout over the
// nodes that hold a layer. Serves both the FC and the Cayley encoder.
class GraphEncoder final : public Encoder {
 public:
  // Complete graph K_L, node v holds layer v.
  static GraphEncoder fully_connected(std::size_t layers, std::size_t width, const MethodConfig& config);
  static GraphEncoder cayley(std::size_t layers, std::size_t width, const MethodConfig& config,
                             NodeAssignment assignment);

  void init(ParamStore& store, Rng& rng) const override;
  Var encode(Var rows, std::size_t batch, ParamStore& store, Rng* dropout_rng) const override;
  std::size_t output_width() const override { return hidden_; }
  std::size_t param_count() const override;

  // Node features after the last MPNN layer, (B*N) x w.
  Var node_features(Var rows, std::size_t batch, ParamStore& store, Rng* dropout_rng) const;
  // Mean over non-virtual nodes of (B*N) x w node features.
  Var readout(Var nodes, std::size_t batch) const;

  const Graph& graph() const { return graph_; }
  const std::vector<std::uint32_t>& layer_to_node() const { return layer_to_node_; }
  const std::vector<bool>& virtual_mask() const { return virtual_mask_; }
  std::string prefix() const { return prefix_; }

 private:
  GraphEncoder(std::string prefix, std::size_t layers, std::size_t width, const MethodConfig& config, Graph graph,
               std::vector<std::uint32_t> layer_to_node);

  std::string prefix_;
  std::size_t layers_;
  std::size_t hidden_;
  double dropout_;
  Graph graph_;
  std::vector<std::uint32_t> layer_to_node_;
  std::vector<bool> virtual_mask_;
  Linear projection_;
  std::vector<MpnnLayer> mpnn_;
};

// Single-stack, evaluation-mode conveniences over the encoder classes.
Tensor set_encode(const LayerStack& stack, ParamStore& params, const MethodConfig& config);
Tensor fc_encode(const LayerStack& stack, ParamStore& params, const MethodConfig& config);
Tensor cayley_encode(const LayerStack& stack, const NodeAssignment& assignment, ParamStore& params,
                     const MethodConfig& config);

// Plain-tensor single GIN / GCN layer, used for inspection and tests.
// Parameters under `prefix` must already exist. gin_layer has no trailing
// activation; gcn_layer applies ReLU unless `activate` is false (the final
// MPNN layer of an encoder).
Tensor gin_layer(const Tensor& nodes, const Graph& graph, ParamStore& params, const std::string& prefix,
                 int gin_mlp_depth);
Tensor gcn_layer(const Tensor& nodes, const Graph& graph, ParamStore& params, const std::string& prefix,
                 bool activate = true);

}  // namespace ilse
