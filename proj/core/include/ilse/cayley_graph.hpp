#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <vector>

namespace ilse {

// Element of SL(2, Z_n): the matrix [[a, b], [c, d]] with entries reduced
// mod n and unit determinant.
struct GroupElement {
  std::int64_t a = 1, b = 0, c = 0, d = 1;

  friend bool operator==(const GroupElement&, const GroupElement&) = default;
  friend auto operator<=>(const GroupElement&, const GroupElement&) = default;
};

// Product x*y reduced mod n.
GroupElement multiply(const GroupElement& x, const GroupElement& y, std::int64_t n);
bool has_unit_determinant(const GroupElement& g, std::int64_t n);

// |SL(2, Z_n)| = n^3 * prod_{p | n} (1 - 1/p^2), in exact integer arithmetic.
// Throws InvalidArgument for n == 0.
std::uint64_t group_size(std::uint64_t n);

struct GraphSize {
  std::uint64_t n;
  std::uint64_t size;
};

// Least n >= 2 with group_size(n) >= layers.
GraphSize smallest_n_for(std::uint64_t layers);

// The generator set {[[1,1],[0,1]], [[1,n-1],[0,1]], [[1,0],[1,1]], [[1,0],[n-1,1]]}.
std::array<GroupElement, 4> canonical_generators(std::int64_t n);

// Simple undirected graph with sorted adjacency lists. Used both for the
// Cayley graphs and for the complete / empty graphs of the other encoders.
class Graph {
 public:
  Graph() = default;
  explicit Graph(std::vector<std::vector<std::uint32_t>> adjacency);

  std::size_t node_count() const { return adjacency_.size(); }
  std::size_t edge_count() const;
  const std::vector<std::uint32_t>& neighbors(std::size_t v) const { return adjacency_[v]; }
  const std::vector<std::vector<std::uint32_t>>& adjacency() const { return adjacency_; }
  std::size_t degree(std::size_t v) const { return adjacency_[v].size(); }

  bool is_symmetric() const;
  bool has_self_loops() const;
  bool is_connected() const;
  // degree -> number of nodes with that degree
  std::map<std::size_t, std::size_t> degree_histogram() const;

  // "u v" per undirected edge (u < v), 0-based.
  void write_edge_list(std::ostream& out) const;

 private:
  std::vector<std::vector<std::uint32_t>> adjacency_;
};

Graph complete_graph(std::size_t nodes);
Graph empty_graph(std::size_t nodes);

class CayleyGraph {
 public:
  // Breadth-first closure from the identity under right multiplication by
  // the canonical generators. Throws InvalidArgument for n < 2.
  static CayleyGraph build(std::int64_t n);

  std::int64_t modulus() const { return modulus_; }
  const std::vector<GroupElement>& nodes() const { return nodes_; }
  const std::array<GroupElement, 4>& generators() const { return generators_; }
  const Graph& graph() const { return graph_; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  std::int64_t modulus_ = 0;
  std::vector<GroupElement> nodes_;
  std::array<GroupElement, 4> generators_{};
  Graph graph_;
};

inline CayleyGraph build_cayley(std::int64_t n) { return CayleyGraph::build(n); }

// Exact diameter by BFS from every node. Throws InvariantViolation if the
// graph is disconnected.
std::size_t graph_diameter(const Graph& g);
inline std::size_t graph_diameter(const CayleyGraph& g) { return graph_diameter(g.graph()); }

}  // namespace ilse
