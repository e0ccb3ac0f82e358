#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "prevalence/design.hpp"
#include "prevalence/graph.hpp"

namespace prevalence {

struct CountThreshold {
  std::vector<int> gamma;  // W_i = 1 iff treated neighbors >= gamma_i
};

struct FractionThreshold {
  std::vector<double> phi;  // W_i = 1 iff treated neighbors >= phi_i * |eta_i|
};

struct ExposureSpec {
  std::variant<CountThreshold, FractionThreshold> mode;
  std::uint8_t w_empty = 0;  // W for units without neighbors

  static ExposureSpec count(int n_units, int gamma);
  static ExposureSpec fraction(int n_units, double phi);
  int size() const;
};

using ExposureVector = std::vector<std::uint8_t>;

/// Throws std::invalid_argument on size mismatch or out-of-range thresholds.
void validate_exposure(const AdjacencyGraph& g, const ExposureSpec& spec);

/// Cluster designs count only other clusters; rejects graphs with an edge
/// inside a cluster.
void validate_cluster_graph(const AdjacencyGraph& g, const Design& d);

ExposureVector compute_exposure(const AdjacencyGraph& g, const ExposureSpec& spec, const Assignment& x);

/// W_i when exactly `treated_count` of eta_i are treated.
std::uint8_t exposure_from_count(const AdjacencyGraph& g, const ExposureSpec& spec, int i, int treated_count);

/// W_i when exactly the listed subset of eta_i is treated. Throws when the
/// subset is not contained in eta_i. The own treatment does not enter W.
std::uint8_t exposure_on_subset(const AdjacencyGraph& g, const ExposureSpec& spec, int i, std::uint8_t x_i,
                                std::span<const int> treated_neighbors);

/// Smallest treated-neighbor count giving W_i = 1; |eta_i| + 1 if none does.
int exposure_min_count(const AdjacencyGraph& g, const ExposureSpec& spec, int i);

}  // namespace prevalence
