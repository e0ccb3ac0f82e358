#include "prevalence/exposure.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace prevalence {

ExposureSpec ExposureSpec::count(int n_units, int gamma) {
  return ExposureSpec{CountThreshold{std::vector<int>(static_cast<std::size_t>(n_units), gamma)}, 0};
}

ExposureSpec ExposureSpec::fraction(int n_units, double phi) {
  return ExposureSpec{FractionThreshold{std::vector<double>(static_cast<std::size_t>(n_units), phi)}, 0};
}

int ExposureSpec::size() const {
  return std::visit([](const auto& m) -> int {
    if constexpr (std::is_same_v<std::decay_t<decltype(m)>, CountThreshold>)
      return static_cast<int>(m.gamma.size());
    else
      return static_cast<int>(m.phi.size());
  }, mode);
}

void validate_exposure(const AdjacencyGraph& g, const ExposureSpec& spec) {
  if (spec.size() != g.size())
    throw std::invalid_argument("exposure: thresholds for " + std::to_string(spec.size()) + " units, graph has " +
                                std::to_string(g.size()));
  if (spec.w_empty > 1) throw std::invalid_argument("exposure: w_empty must be 0 or 1");
  if (const auto* c = std::get_if<CountThreshold>(&spec.mode)) {
    for (std::size_t i = 0; i < c->gamma.size(); ++i)
      if (c->gamma[i] < 0) throw std::invalid_argument("exposure: negative threshold at unit " + std::to_string(i));
  } else {
    const auto& f = std::get<FractionThreshold>(spec.mode);
    for (std::size_t i = 0; i < f.phi.size(); ++i)
      if (!(f.phi[i] >= 0.0 && f.phi[i] <= 1.0))
        throw std::invalid_argument("exposure: fraction outside [0,1] at unit " + std::to_string(i));
  }
}

void validate_cluster_graph(const AdjacencyGraph& g, const Design& d) {
  if (!d.clustered()) return;
  for (int i = 0; i < g.size(); ++i)
    for (int j : g.out_neighbors(i))
      if (d.block_of(i) == d.block_of(j))
        throw std::invalid_argument("exposure: edge " + std::to_string(i) + " -> " + std::to_string(j) +
                                    " lies inside cluster " + std::to_string(d.block_of(i)));
}

std::uint8_t exposure_from_count(const AdjacencyGraph& g, const ExposureSpec& spec, int i, int treated_count) {
  const int degree = g.out_degree(i);
  if (degree == 0) return spec.w_empty;
  if (const auto* c = std::get_if<CountThreshold>(&spec.mode))
    return treated_count >= c->gamma[static_cast<std::size_t>(i)] ? 1 : 0;
  const double phi = std::get<FractionThreshold>(spec.mode).phi[static_cast<std::size_t>(i)];
  return treated_count >= phi * degree ? 1 : 0;
}

int exposure_min_count(const AdjacencyGraph& g, const ExposureSpec& spec, int i) {
  const int degree = g.out_degree(i);
  for (int k = 0; k <= degree; ++k)
    if (exposure_from_count(g, spec, i, k)) return k;
  return degree + 1;
}

ExposureVector compute_exposure(const AdjacencyGraph& g, const ExposureSpec& spec, const Assignment& x) {
  if (static_cast<int>(x.size()) != g.size() || spec.size() != g.size())
    throw std::invalid_argument("compute_exposure: dimension mismatch");
  ExposureVector w(x.size());
  for (int i = 0; i < g.size(); ++i) {
    int treated = 0;
    for (int j : g.out_neighbors(i)) treated += x[static_cast<std::size_t>(j)];
    w[static_cast<std::size_t>(i)] = exposure_from_count(g, spec, i, treated);
  }
  return w;
}

std::uint8_t exposure_on_subset(const AdjacencyGraph& g, const ExposureSpec& spec, int i, std::uint8_t /*x_i*/,
                                std::span<const int> treated_neighbors) {
  const auto nb = g.out_neighbors(i);
  std::vector<int> subset(treated_neighbors.begin(), treated_neighbors.end());
  std::sort(subset.begin(), subset.end());
  subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
  for (int k : subset)
    if (!std::binary_search(nb.begin(), nb.end(), k))
      throw std::invalid_argument("exposure_on_subset: unit " + std::to_string(k) + " is not a neighbor of " +
                                  std::to_string(i));
  return exposure_from_count(g, spec, i, static_cast<int>(subset.size()));
}

}  // namespace prevalence
