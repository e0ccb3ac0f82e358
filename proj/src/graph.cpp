#include "prevalence/graph.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace prevalence {

AdjacencyGraph::AdjacencyGraph(int n_units) {
  if (n_units < 0) throw std::invalid_argument("graph: negative unit count");
  out_.resize(static_cast<std::size_t>(n_units));
  in_.resize(static_cast<std::size_t>(n_units));
}

bool AdjacencyGraph::has_edge(int src, int dst) const {
  const auto& nb = out_[static_cast<std::size_t>(src)];
  return std::binary_search(nb.begin(), nb.end(), dst);
}

int AdjacencyGraph::max_degree() const {
  std::size_t best = 0;
  for (std::size_t i = 0; i < out_.size(); ++i) best = std::max({best, out_[i].size(), in_[i].size()});
  return static_cast<int>(best);
}

std::size_t AdjacencyGraph::edge_count() const {
  std::size_t total = 0;
  for (const auto& nb : out_) total += nb.size();
  return total;
}

std::vector<Edge> AdjacencyGraph::edges() const {
  std::vector<Edge> result;
  result.reserve(edge_count());
  for (int i = 0; i < size(); ++i)
    for (int j : out_neighbors(i)) result.emplace_back(i, j);
  return result;
}

AdjacencyGraph build_graph(std::span<const Edge> edges, int n_units) {
  AdjacencyGraph g(n_units);
  for (const auto& [src, dst] : edges) {
    if (src < 0 || src >= n_units || dst < 0 || dst >= n_units)
      throw std::invalid_argument("graph: edge (" + std::to_string(src) + ", " + std::to_string(dst) +
                                  ") out of range for " + std::to_string(n_units) + " units");
    if (src == dst) throw std::invalid_argument("graph: self-loop at unit " + std::to_string(src));
    g.out_[static_cast<std::size_t>(src)].push_back(dst);
  }
  for (auto& nb : g.out_) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  for (int i = 0; i < n_units; ++i)
    for (int j : g.out_[static_cast<std::size_t>(i)]) g.in_[static_cast<std::size_t>(j)].push_back(i);
  return g;
}

AdjacencyGraph build_undirected_graph(std::span<const Edge> edges, int n_units) {
  std::vector<Edge> both;
  both.reserve(2 * edges.size());
  for (const auto& [a, b] : edges) {
    both.emplace_back(a, b);
    both.emplace_back(b, a);
  }
  return build_graph(both, n_units);
}

std::vector<int> joint_neighborhood(const AdjacencyGraph& g, int i, int j) {
  if (i == j) throw std::invalid_argument("joint_neighborhood: i == j");
  std::vector<int> result;
  auto a = g.out_neighbors(i);
  auto b = g.out_neighbors(j);
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(result));
  std::erase_if(result, [&](int k) { return k == i || k == j; });
  return result;
}

}  // namespace prevalence
