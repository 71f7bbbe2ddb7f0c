#include "ilse/cayley_graph.hpp"

#include <algorithm>
#include <deque>
#include <ostream>
#include <unordered_map>

#include "ilse/errors.hpp"

namespace ilse {
namespace {

std::int64_t mod(std::int64_t x, std::int64_t n) {
  const std::int64_t r = x % n;
  return r < 0 ? r + n : r;
}

struct ElementHash {
  std::size_t operator()(const GroupElement& g) const noexcept {
    std::uint64_t h = 1469598103934665603ULL;
    for (std::int64_t v : {g.a, g.b, g.c, g.d}) {
      h ^= static_cast<std::uint64_t>(v);
      h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

std::vector<std::size_t> bfs_distances(const Graph& g, std::size_t source) {
  constexpr auto kUnseen = static_cast<std::size_t>(-1);
  std::vector<std::size_t> dist(g.node_count(), kUnseen);
  std::deque<std::size_t> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const std::size_t v = queue.front();
    queue.pop_front();
    for (std::uint32_t u : g.neighbors(v)) {
      if (dist[u] == kUnseen) {
        dist[u] = dist[v] + 1;
        queue.push_back(u);
      }
    }
  }
  return dist;
}

}  // namespace

GroupElement multiply(const GroupElement& x, const GroupElement& y, std::int64_t n) {
  return {mod(x.a * y.a + x.b * y.c, n), mod(x.a * y.b + x.b * y.d, n),
          mod(x.c * y.a + x.d * y.c, n), mod(x.c * y.b + x.d * y.d, n)};
}

bool has_unit_determinant(const GroupElement& g, std::int64_t n) {
  return mod(g.a * g.d - g.b * g.c, n) == mod(1, n);
}

std::uint64_t group_size(std::uint64_t n) {
  if (n == 0) throw InvalidArgument("group_size: n must be positive");
  std::uint64_t size = n * n * n;
  std::uint64_t rest = n;
  for (std::uint64_t p = 2; p * p <= rest; ++p) {
    if (rest % p != 0) continue;
    while (rest % p == 0) rest /= p;
    size = size / (p * p) * (p * p - 1);
  }
  if (rest > 1) size = size / (rest * rest) * (rest * rest - 1);
  return size;
}

GraphSize smallest_n_for(std::uint64_t layers) {
  if (layers == 0) throw InvalidArgument("smallest_n_for: layer count must be positive");
  for (std::uint64_t n = 2;; ++n) {
    const std::uint64_t size = group_size(n);
    if (size >= layers) return {n, size};
  }
}

std::array<GroupElement, 4> canonical_generators(std::int64_t n) {
  return {GroupElement{1, mod(1, n), 0, 1}, GroupElement{1, mod(n - 1, n), 0, 1},
          GroupElement{1, 0, mod(1, n), 1}, GroupElement{1, 0, mod(n - 1, n), 1}};
}

Graph::Graph(std::vector<std::vector<std::uint32_t>> adjacency) : adjacency_(std::move(adjacency)) {
  for (auto& nbrs : adjacency_) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
  }
}

std::size_t Graph::edge_count() const {
  std::size_t total = 0;
  for (const auto& nbrs : adjacency_) total += nbrs.size();
  return total / 2;
}

bool Graph::is_symmetric() const {
  for (std::size_t v = 0; v < adjacency_.size(); ++v) {
    for (std::uint32_t u : adjacency_[v]) {
      if (u >= adjacency_.size()) return false;
      const auto& back = adjacency_[u];
      if (!std::binary_search(back.begin(), back.end(), static_cast<std::uint32_t>(v))) return false;
    }
  }
  return true;
}

bool Graph::has_self_loops() const {
  for (std::size_t v = 0; v < adjacency_.size(); ++v) {
    const auto& nbrs = adjacency_[v];
    if (std::binary_search(nbrs.begin(), nbrs.end(), static_cast<std::uint32_t>(v))) return true;
  }
  return false;
}

bool Graph::is_connected() const {
  if (adjacency_.empty()) return true;
  const auto dist = bfs_distances(*this, 0);
  return std::none_of(dist.begin(), dist.end(),
                      [](std::size_t d) { return d == static_cast<std::size_t>(-1); });
}

std::map<std::size_t, std::size_t> Graph::degree_histogram() const {
  std::map<std::size_t, std::size_t> hist;
  for (const auto& nbrs : adjacency_) ++hist[nbrs.size()];
  return hist;
}

void Graph::write_edge_list(std::ostream& out) const {
  for (std::size_t v = 0; v < adjacency_.size(); ++v) {
    for (std::uint32_t u : adjacency_[v]) {
      if (v < u) out << v << ' ' << u << '\n';
    }
  }
}

Graph complete_graph(std::size_t nodes) {
  std::vector<std::vector<std::uint32_t>> adj(nodes);
  for (std::size_t v = 0; v < nodes; ++v) {
    for (std::size_t u = 0; u < nodes; ++u) {
      if (u != v) adj[v].push_back(static_cast<std::uint32_t>(u));
    }
  }
  return Graph(std::move(adj));
}

Graph empty_graph(std::size_t nodes) { return Graph(std::vector<std::vector<std::uint32_t>>(nodes)); }

CayleyGraph CayleyGraph::build(std::int64_t n) {
  if (n < 2) throw InvalidArgument("build_cayley: modulus must be at least 2, got " + std::to_string(n));
  CayleyGraph out;
  out.modulus_ = n;
  out.generators_ = canonical_generators(n);

  std::unordered_map<GroupElement, std::uint32_t, ElementHash> index;
  std::vector<std::vector<std::uint32_t>> adj;
  const GroupElement identity{1, 0, 0, 1};
  index.emplace(identity, 0);
  out.nodes_.push_back(identity);
  adj.emplace_back();

  for (std::size_t head = 0; head < out.nodes_.size(); ++head) {
    const GroupElement current = out.nodes_[head];
    for (const GroupElement& s : out.generators_) {
      const GroupElement next = multiply(current, s, n);
      auto [it, inserted] = index.emplace(next, static_cast<std::uint32_t>(out.nodes_.size()));
      if (inserted) {
        out.nodes_.push_back(next);
        adj.emplace_back();
      }
      if (it->second != head) {
        adj[head].push_back(it->second);
        adj[it->second].push_back(static_cast<std::uint32_t>(head));
      }
    }
  }
  out.graph_ = Graph(std::move(adj));
  if (out.nodes_.size() != group_size(static_cast<std::uint64_t>(n))) {
    throw InvariantViolation("build_cayley: closure size disagrees with group order");
  }
  return out;
}

std::size_t graph_diameter(const Graph& g) {
  std::size_t diameter = 0;
  for (std::size_t v = 0; v < g.node_count(); ++v) {
    for (std::size_t d : bfs_distances(g, v)) {
      if (d == static_cast<std::size_t>(-1)) throw InvariantViolation("graph_diameter: graph is disconnected");
      diameter = std::max(diameter, d);
    }
  }
  return diameter;
}

}  // namespace ilse
