#include "ilse/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ilse/errors.hpp"

namespace ilse {

// ---------------------------------------------------------------------------
// LayerStack

LayerStack::LayerStack(std::size_t layers, std::size_t width, double fill) : matrix_(Tensor::matrix(layers, width, fill)) {}

LayerStack::LayerStack(Tensor matrix) : matrix_(std::move(matrix)) {
  if (matrix_.rank() != 2) throw InvalidArgument("LayerStack: expected an L x d matrix, got " + matrix_.shape_string());
}

Tensor mean_pool_tokens(const Tensor& hidden) {
  const std::size_t tokens = hidden.rank() == 2 ? hidden.rows() : (hidden.size() == 0 ? 0 : 1);
  if (tokens == 0) throw InvalidArgument("mean_pool_tokens: no tokens");
  const std::size_t d = hidden.cols();
  Tensor z = Tensor::vector(d);
  for (std::size_t t = 0; t < tokens; ++t) {
    for (std::size_t j = 0; j < d; ++j) z[j] += hidden(t, j);
  }
  const double inv = 1.0 / static_cast<double>(tokens);
  for (double& v : z.data()) v *= inv;
  return z;
}

Tensor batch_rows(std::span<const LayerStack* const> stacks) {
  if (stacks.empty()) throw InvalidArgument("batch_rows: empty batch");
  const std::size_t l = stacks.front()->layers(), d = stacks.front()->width();
  Tensor out = Tensor::matrix(stacks.size() * l, d);
  for (std::size_t b = 0; b < stacks.size(); ++b) {
    const LayerStack& s = *stacks[b];
    if (s.layers() != l || s.width() != d) throw InvalidArgument("batch_rows: stacks differ in shape");
    std::copy(s.matrix().raw(), s.matrix().raw() + l * d, out.raw() + b * l * d);
  }
  return out;
}

// ---------------------------------------------------------------------------
// MethodConfig

void MethodConfig::validate() const {
  if (hidden == 0) throw InvalidArgument("method config: hidden width must be positive");
  if (dropout < 0.0 || dropout > 0.3) throw InvalidArgument("method config: dropout must be in [0, 0.3]");
  if (is_graph()) {
    if (mpnn_layers < 1 || mpnn_layers > 2) throw InvalidArgument("method config: mpnn_layers must be 1 or 2");
    if (aggregation == Aggregation::kGin && (gin_mlp_depth < 0 || gin_mlp_depth > 2)) {
      throw InvalidArgument("method config: gin_mlp_depth must be in {0, 1, 2}");
    }
  }
}

std::string method_name(const MethodConfig& c) {
  const char* agg = c.aggregation == Aggregation::kGin ? "gin" : "gcn";
  switch (c.method) {
    case Method::kLastLayer: return "last_layer";
    case Method::kBestLayer: return "best_layer";
    case Method::kWeighted: return "weighted";
    case Method::kMlpLast: return "mlp_last";
    case Method::kMlpBest: return "mlp_best";
    case Method::kDwatt: return "dwatt";
    case Method::kSet: return "set";
    case Method::kFc: return std::string("fc-") + agg;
    case Method::kCayley: return std::string("cayley-") + agg;
  }
  return "unknown";
}

MethodConfig parse_method(const std::string& raw) {
  std::string name = raw;
  std::replace(name.begin(), name.end(), '-', '_');
  MethodConfig c;
  if (name == "last_layer") c.method = Method::kLastLayer;
  else if (name == "best_layer") c.method = Method::kBestLayer;
  else if (name == "weighted") c.method = Method::kWeighted;
  else if (name == "mlp_last" || name == "mlp") c.method = Method::kMlpLast;
  else if (name == "mlp_best") c.method = Method::kMlpBest;
  else if (name == "dwatt") c.method = Method::kDwatt;
  else if (name == "set") c.method = Method::kSet;
  else if (name == "fc_gin" || name == "fc") c.method = Method::kFc;
  else if (name == "fc_gcn") {
    c.method = Method::kFc;
    c.aggregation = Aggregation::kGcn;
  }
  else if (name == "cayley_gin" || name == "cayley") c.method = Method::kCayley;
  else if (name == "cayley_gcn") {
    c.method = Method::kCayley;
    c.aggregation = Aggregation::kGcn;
  }
  else throw InvalidArgument("unknown method '" + raw + "'");
  return c;
}

// ---------------------------------------------------------------------------
// NodeAssignment

std::size_t NodeAssignment::virtual_count() const {
  return static_cast<std::size_t>(std::count(virtual_mask.begin(), virtual_mask.end(), true));
}

void NodeAssignment::validate(std::size_t layers) const {
  if (!graph) throw InvalidArgument("node assignment: no graph");
  const std::size_t n = graph->node_count();
  if (layer_to_node.size() != layers) {
    throw InvalidArgument("node assignment covers " + std::to_string(layer_to_node.size()) + " layers, stack has " +
                          std::to_string(layers));
  }
  if (virtual_mask.size() != n) throw InvalidArgument("node assignment: mask size differs from graph size");
  std::vector<bool> used(n, false);
  for (std::uint32_t v : layer_to_node) {
    if (v >= n || used[v]) throw InvalidArgument("node assignment: map is not injective into the graph");
    used[v] = true;
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (used[v] == virtual_mask[v]) throw InvalidArgument("node assignment: virtual mask inconsistent with map");
  }
}

NodeAssignment assign_layers(std::size_t layers, std::shared_ptr<const CayleyGraph> graph, std::uint64_t seed) {
  if (!graph) throw InvalidArgument("assign_layers: no graph");
  const std::size_t n = graph->node_count();
  if (layers == 0 || layers > n) {
    throw InvalidArgument("assign_layers: cannot place " + std::to_string(layers) + " layers on " +
                          std::to_string(n) + " nodes");
  }
  std::vector<std::uint32_t> nodes(n);
  std::iota(nodes.begin(), nodes.end(), 0u);
  Rng rng(seed, Stream::kAssignment);
  rng.shuffle(nodes);
  NodeAssignment a;
  a.graph = std::move(graph);
  a.layer_to_node.assign(nodes.begin(), nodes.begin() + static_cast<std::ptrdiff_t>(layers));
  a.virtual_mask.assign(n, true);
  for (std::uint32_t v : a.layer_to_node) a.virtual_mask[v] = false;
  return a;
}

// ---------------------------------------------------------------------------
// Row mixes

RowMix gin_mix(const Graph& g, std::size_t batch) {
  const std::size_t n = g.node_count();
  RowMix mix;
  mix.input_rows = batch * n;
  mix.rows.resize(batch * n);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto base = static_cast<std::uint32_t>(b * n);
    for (std::size_t v = 0; v < n; ++v) {
      auto& row = mix.rows[b * n + v];
      row.push_back({base + static_cast<std::uint32_t>(v), 1.0});
      for (std::uint32_t u : g.neighbors(v)) row.push_back({base + u, 1.0});
    }
  }
  return mix;
}

RowMix gcn_mix(const Graph& g, std::size_t batch) {
  const std::size_t n = g.node_count();
  std::vector<double> inv_sqrt(n);
  for (std::size_t v = 0; v < n; ++v) inv_sqrt[v] = 1.0 / std::sqrt(static_cast<double>(g.degree(v) + 1));
  RowMix mix;
  mix.input_rows = batch * n;
  mix.rows.resize(batch * n);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto base = static_cast<std::uint32_t>(b * n);
    for (std::size_t v = 0; v < n; ++v) {
      auto& row = mix.rows[b * n + v];
      row.push_back({base + static_cast<std::uint32_t>(v), inv_sqrt[v] * inv_sqrt[v]});
      for (std::uint32_t u : g.neighbors(v)) row.push_back({base + u, inv_sqrt[v] * inv_sqrt[u]});
    }
  }
  return mix;
}

namespace {

// Mean over groups of `group` consecutive rows restricted to `members`.
std::shared_ptr<RowMix> group_mean_mix(std::size_t batch, std::size_t group, const std::vector<std::uint32_t>& members) {
  auto mix = std::make_shared<RowMix>();
  mix->input_rows = batch * group;
  mix->rows.resize(batch);
  const double w = 1.0 / static_cast<double>(members.size());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::uint32_t m : members) mix->rows[b].push_back({static_cast<std::uint32_t>(b * group + m), w});
  }
  return mix;
}

std::vector<std::size_t> gin_widths(std::size_t in, std::size_t out, int depth) {
  std::vector<std::size_t> widths{in};
  for (int i = 0; i < depth; ++i) widths.push_back(out);
  widths.push_back(out);
  return widths;
}

}  // namespace

// ---------------------------------------------------------------------------
// MpnnLayer

MpnnLayer::MpnnLayer(std::string prefix, Aggregation aggregation, std::size_t in, std::size_t out, int gin_mlp_depth)
    : aggregation_(aggregation),
      update_(aggregation == Aggregation::kGin ? Mlp(prefix + ".mlp", gin_widths(in, out, gin_mlp_depth))
                                               : Mlp(prefix + ".lin", {in, out})) {}

void MpnnLayer::init(ParamStore& store, Rng& rng) const { update_.init(store, rng); }

Var MpnnLayer::forward(Var nodes, std::shared_ptr<const RowMix> mix, ParamStore& store) const {
  return update_.forward(ops::mix_rows(nodes, std::move(mix)), store);
}

Var MpnnLayer::forward(Var nodes, const RowMix& mix, ParamStore& store) const {
  return forward(nodes, std::make_shared<const RowMix>(mix), store);
}

// ---------------------------------------------------------------------------
// SetEncoder

SetEncoder::SetEncoder(std::size_t layers, std::size_t width, const MethodConfig& config)
    : layers_(layers),
      phi_("set.phi", {width, config.hidden}, /*activate_output=*/true, config.dropout),
      rho_("set.rho", {config.hidden, config.hidden}) {
  if (layers == 0) throw InvalidArgument("set encoder: no layers");
}

void SetEncoder::init(ParamStore& store, Rng& rng) const {
  phi_.init(store, rng);
  rho_.init(store, rng);
}

Var SetEncoder::encode(Var rows, std::size_t batch, ParamStore& store, Rng* dropout_rng) const {
  const Tensor& rv = rows.tape->value(rows);
  if (rv.rows() != batch * layers_ || rv.cols() != phi_.in()) {
    throw InvalidArgument("set encoder: expected " + std::to_string(batch * layers_) + " x " +
                          std::to_string(phi_.in()) + " rows, got " + rv.shape_string());
  }
  std::vector<std::uint32_t> all(layers_);
  std::iota(all.begin(), all.end(), 0u);
  Var elements = phi_.forward(rows, store, dropout_rng);
  Var pooled = ops::mix_rows(elements, group_mean_mix(batch, layers_, all));
  return rho_.forward(pooled, store);
}

// ---------------------------------------------------------------------------
// GraphEncoder

GraphEncoder::GraphEncoder(std::string prefix, std::size_t layers, std::size_t width, const MethodConfig& config,
                           Graph graph, std::vector<std::uint32_t> layer_to_node)
    : prefix_(std::move(prefix)),
      layers_(layers),
      hidden_(config.hidden),
      dropout_(config.dropout),
      graph_(std::move(graph)),
      layer_to_node_(std::move(layer_to_node)),
      projection_{prefix_ + ".proj", width, config.hidden} {
  config.validate();
  if (layers == 0) throw InvalidArgument("graph encoder: no layers");
  virtual_mask_.assign(graph_.node_count(), true);
  for (std::uint32_t v : layer_to_node_) virtual_mask_[v] = false;
  for (int k = 0; k < config.mpnn_layers; ++k) {
    mpnn_.emplace_back(prefix_ + ".mpnn" + std::to_string(k), config.aggregation, config.hidden, config.hidden,
                       config.gin_mlp_depth);
  }
}

GraphEncoder GraphEncoder::fully_connected(std::size_t layers, std::size_t width, const MethodConfig& config) {
  std::vector<std::uint32_t> identity(layers);
  std::iota(identity.begin(), identity.end(), 0u);
  return GraphEncoder("fc", layers, width, config, complete_graph(layers), std::move(identity));
}

GraphEncoder GraphEncoder::cayley(std::size_t layers, std::size_t width, const MethodConfig& config,
                                  NodeAssignment assignment) {
  assignment.validate(layers);
  return GraphEncoder("cayley", layers, width, config, assignment.graph->graph(), std::move(assignment.layer_to_node));
}

void GraphEncoder::init(ParamStore& store, Rng& rng) const {
  projection_.init(store, rng);
  for (const auto& layer : mpnn_) layer.init(store, rng);
}

std::size_t GraphEncoder::param_count() const {
  std::size_t n = projection_.param_count();
  for (const auto& layer : mpnn_) n += layer.param_count();
  return n;
}

Var GraphEncoder::node_features(Var rows, std::size_t batch, ParamStore& store, Rng* dropout_rng) const {
  const Tensor& rv = rows.tape->value(rows);
  if (rv.rows() != batch * layers_ || rv.cols() != projection_.in) {
    throw InvalidArgument(prefix_ + " encoder: expected " + std::to_string(batch * layers_) + " x " +
                          std::to_string(projection_.in) + " rows, got " + rv.shape_string());
  }
  const std::size_t n = graph_.node_count();
  Var projected = ops::relu(projection_.forward(rows, store));

  // Layer rows onto their nodes; virtual nodes get an empty term list, i.e. zero.
  auto scatter = std::make_shared<RowMix>();
  scatter->input_rows = batch * layers_;
  scatter->rows.resize(batch * n);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t l = 0; l < layers_; ++l) {
      scatter->rows[b * n + layer_to_node_[l]].push_back({static_cast<std::uint32_t>(b * layers_ + l), 1.0});
    }
  }
  Var h = ops::mix_rows(projected, scatter);

  std::shared_ptr<const RowMix> mix;
  for (std::size_t k = 0; k < mpnn_.size(); ++k) {
    if (!mix) {
      mix = std::make_shared<const RowMix>(mpnn_[k].aggregation() == Aggregation::kGin ? gin_mix(graph_, batch)
                                                                                        : gcn_mix(graph_, batch));
    }
    h = mpnn_[k].forward(h, mix, store);
    if (k + 1 < mpnn_.size()) h = ops::relu(h);
    if (dropout_ > 0.0 && dropout_rng != nullptr) h = ops::dropout(h, dropout_, *dropout_rng);
  }
  return h;
}

Var GraphEncoder::readout(Var nodes, std::size_t batch) const {
  std::vector<std::uint32_t> real;
  for (std::size_t v = 0; v < virtual_mask_.size(); ++v) {
    if (!virtual_mask_[v]) real.push_back(static_cast<std::uint32_t>(v));
  }
  return ops::mix_rows(nodes, group_mean_mix(batch, graph_.node_count(), real));
}

Var GraphEncoder::encode(Var rows, std::size_t batch, ParamStore& store, Rng* dropout_rng) const {
  return readout(node_features(rows, batch, store, dropout_rng), batch);
}

// ---------------------------------------------------------------------------
// Tensor conveniences

namespace {

Tensor run_single(const Encoder& encoder, const LayerStack& stack, ParamStore& params) {
  Tape tape(false);
  Var rows = tape.constant(stack.matrix());
  Var out = encoder.encode(rows, 1, params, nullptr);
  const Tensor& v = tape.value(out);
  return Tensor({v.cols()}, std::vector<double>(v.data().begin(), v.data().end()));
}

}  // namespace

Tensor set_encode(const LayerStack& stack, ParamStore& params, const MethodConfig& config) {
  return run_single(SetEncoder(stack.layers(), stack.width(), config), stack, params);
}

Tensor fc_encode(const LayerStack& stack, ParamStore& params, const MethodConfig& config) {
  return run_single(GraphEncoder::fully_connected(stack.layers(), stack.width(), config), stack, params);
}

Tensor cayley_encode(const LayerStack& stack, const NodeAssignment& assignment, ParamStore& params,
                     const MethodConfig& config) {
  if (config.method != Method::kCayley) throw InvalidArgument("cayley_encode: config is not a cayley encoder");
  return run_single(GraphEncoder::cayley(stack.layers(), stack.width(), config, assignment), stack, params);
}

Tensor gin_layer(const Tensor& nodes, const Graph& graph, ParamStore& params, const std::string& prefix,
                 int gin_mlp_depth) {
  if (nodes.rows() != graph.node_count()) throw InvalidArgument("gin_layer: one feature row per node required");
  const std::size_t out = params.value(prefix + ".mlp." + std::to_string(gin_mlp_depth) + ".w").cols();
  MpnnLayer layer(prefix, Aggregation::kGin, nodes.cols(), out, gin_mlp_depth);
  Tape tape(false);
  return tape.value(layer.forward(tape.constant(nodes), gin_mix(graph, 1), params));
}

Tensor gcn_layer(const Tensor& nodes, const Graph& graph, ParamStore& params, const std::string& prefix,
                 bool activate) {
  if (nodes.rows() != graph.node_count()) throw InvalidArgument("gcn_layer: one feature row per node required");
  const std::size_t out = params.value(prefix + ".lin.0.w").cols();
  MpnnLayer layer(prefix, Aggregation::kGcn, nodes.cols(), out, 0);
  Tape tape(false);
  Var h = layer.forward(tape.constant(nodes), gcn_mix(graph, 1), params);
  return tape.value(activate ? ops::relu(h) : h);
}

}  // namespace ilse
