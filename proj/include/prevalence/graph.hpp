#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace prevalence {

using Edge = std::pair<int, int>;

/// Directed proxy network. Both adjacency directions are materialized:
/// out_neighbors(i) is the set of units whose treatment enters unit i's
/// exposure, in_neighbors(i) the units whose exposure depends on i.
/// Neighbor lists are sorted and duplicate-free; there are no self-loops.
class AdjacencyGraph {
 public:
  AdjacencyGraph() = default;
  explicit AdjacencyGraph(int n_units);

  int size() const { return static_cast<int>(out_.size()); }
  std::span<const int> out_neighbors(int i) const { return out_[static_cast<std::size_t>(i)]; }
  std::span<const int> in_neighbors(int i) const { return in_[static_cast<std::size_t>(i)]; }
  int out_degree(int i) const { return static_cast<int>(out_[static_cast<std::size_t>(i)].size()); }
  int in_degree(int i) const { return static_cast<int>(in_[static_cast<std::size_t>(i)].size()); }
  bool has_edge(int src, int dst) const;

  /// Max over units of in- and out-degree.
  int max_degree() const;
  std::size_t edge_count() const;
  std::vector<Edge> edges() const;

 private:
  friend AdjacencyGraph build_graph(std::span<const Edge>, int);
  std::vector<std::vector<int>> out_;
  std::vector<std::vector<int>> in_;
};

/// Builds a graph from (src, dst) pairs; dst becomes an out-neighbor of src.
/// Duplicate edges collapse. Throws std::invalid_argument on self-loops or
/// out-of-range indices.
AdjacencyGraph build_graph(std::span<const Edge> edges, int n_units);

/// Emits both directions for every pair.
AdjacencyGraph build_undirected_graph(std::span<const Edge> edges, int n_units);

/// (eta_i ∪ eta_j) \ {i, j}, sorted.
std::vector<int> joint_neighborhood(const AdjacencyGraph& g, int i, int j);

}  // namespace prevalence
