#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prevalence/analysis.hpp"
#include "prevalence/graph.hpp"
#include "prevalence/oracle.hpp"

namespace prevalence {

/// Undirected ring; unit i links to the d_max / 2 nearest units on each side.
AdjacencyGraph ring_graph(int n, int d_max);

/// Undirected graph with in- and out-degree at most d_max, built by adding
/// random pairs until the mean degree reaches mean_degree or pairs run out.
AdjacencyGraph random_bounded_degree_graph(int n, int d_max, double mean_degree, std::uint64_t seed);

struct ClusterGeometry {
  AdjacencyGraph graph;
  std::vector<int> cluster_of;
};

/// Clusters of cluster_size units placed on a line; every unit links to all
/// units of the clusters within `radius` positions, never its own.
ClusterGeometry cluster_line(int n_clusters, int cluster_size, int radius);

/// Relabels a random `fraction` of the units among themselves.
AdjacencyGraph permute_graph(const AdjacencyGraph& g, double fraction, std::uint64_t seed);

struct ModelConfig {
  double baseline_lo = 0.0, baseline_hi = 1.0;
  double direct_lo = 0.0, direct_hi = 0.0;
  double spillover_lo = 0.0, spillover_hi = 0.0;
  double spillover_share = 1.0;  // share of units with a nonzero spillover coefficient
  std::string exposure = "count";  // "count" or "fraction"
  double threshold = 1.0;          // gamma or phi
};

ExposureSpec make_exposure(const ModelConfig& m, int n);

/// Coefficients drawn uniformly from the configured ranges.
ThresholdResponse draw_threshold_model(const ModelConfig& m, const AdjacencyGraph& true_graph, std::uint64_t seed);

struct SimConfig {
  std::string experiment = "coverage";  // coverage | normality | consistency
  std::string graph = "ring";           // ring | random | cluster
  int d_max = 4;
  double mean_degree = 3.0;
  int cluster_size = 4;
  int cluster_radius = 1;
  double treated_fraction = 0.5;
  double misspecify_fraction = 0.0;  // analysis graph = true graph with this share relabeled
  ModelConfig model;
  std::vector<int> n_grid{400};
  int replications = 500;
  int seeds = 1;  // independent repetitions per N (normality)
  std::vector<double> alphas{0.025};
  std::uint64_t seed = 1;
  int variance_multiplier = 10;
  std::uint64_t enumeration_cap = 100000;
  AnalysisConfig analysis;
  unsigned threads = 1;
};

/// Throws std::invalid_argument on an invalid configuration.
void validate_sim_config(const SimConfig& cfg);

struct CoverageCell {
  int n = 0;
  double alpha = 0.0;
  double confidence_level = 0.0;
  int replications = 0;
  int misses = 0;
  double coverage = 0.0;
  double coverage_se = 0.0;
  double mean_bound = 0.0;
  double mean_bound_se = 0.0;
  double mean_point_estimate = 0.0;
  double mean_psi = 0.0;
  double backup_share = 0.0;
  int excluded_units = 0;
  long mc_entries = 0;
};

struct CoverageReport {
  std::vector<CoverageCell> cells;
};

CoverageReport run_coverage(const SimConfig& cfg);

struct NormalityCell {
  int n = 0;
  int replications = 0;
  std::string variance_method;  // "exact" or "monte-carlo"
  double var_tau = 0.0;
  double mean_tau = 0.0;         // empirical
  double variance_floor = 0.0;   // N^0.6
  bool degenerate = false;
  std::vector<double> ks_per_seed;
  double ks = 0.0;               // median over seeds
};

struct NormalityReport {
  std::vector<NormalityCell> cells;
};

NormalityReport run_normality(const SimConfig& cfg);

struct ConsistencyCell {
  int n = 0;
  int replications = 0;
  double median = 0.0;  // of |L_hat - L| / N
  double q10 = 0.0;
  double q90 = 0.0;
  double mean_psi_fraction = 0.0;
};

struct ConsistencyReport {
  std::vector<ConsistencyCell> cells;
  double ratio = 0.0;  // median at the smallest N over median at the largest
};

ConsistencyReport run_consistency(const SimConfig& cfg);

/// Kolmogorov-Smirnov distance between a sample and the standard normal.
double ks_standard_normal(std::vector<double> sample);

}  // namespace prevalence
