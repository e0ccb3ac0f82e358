#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prevalence/design.hpp"
#include "prevalence/exposure.hpp"
#include "prevalence/graph.hpp"
#include "prevalence/weights.hpp"

namespace prevalence {

enum class Method { exact, monte_carlo, excluded };
std::string to_string(Method m);

struct EngineConfig {
  int exact_cap = 22;          // max free neighbor blocks enumerated exactly
  int mc_replications = 20000; // per Monte Carlo entry
  std::uint64_t seed = 0;
  double positivity_floor = 0.05;
  unsigned threads = 1;
};

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  int replications = 0;
};

struct UnitPropensity {
  std::array<double, 2> p1{0.0, 0.0};          // P(W_i = 1 | X_i = x), x = 0, 1
  std::array<double, 2> std_error{0.0, 0.0};
  Method method = Method::exact;  // how p1 was obtained
  int replications = 0;
  bool excluded = false;  // empty neighborhood or positivity violation
};

struct PropensityTable {
  std::vector<UnitPropensity> units;
  double positivity_floor = 0.0;

  int size() const { return static_cast<int>(units.size()); }
  double p1(int i, std::uint8_t x) const { return units[static_cast<std::size_t>(i)].p1[x]; }
  bool excluded(int i) const { return units[static_cast<std::size_t>(i)].excluded; }
  int excluded_count() const;
};

/// P(W_i = 1 | X_i = x) by hypergeometric counting over the free neighbor
/// blocks. Returns nullopt when more than `cap` blocks would be enumerated.
std::optional<double> exact_propensity(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec, int i,
                                       std::uint8_t x, int cap = 22);

/// Empirical P(W_i = 1 | X_i = x) over draws from the conditional design.
McEstimate mc_propensity(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec, int i, std::uint8_t x,
                         int replications, std::uint64_t seed);

/// Exact where feasible, Monte Carlo otherwise. Units with empty
/// neighborhoods or propensities outside [floor, 1 - floor] for either
/// treatment value are excluded.
PropensityTable build_propensity_table(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec,
                                       const EngineConfig& cfg);

/// The weight function behind u: variant plus the propensities it divides by.
struct UDefinition {
  Variant variant = Variant::ipw;
  const PropensityTable* table = nullptr;

  /// u_i when X_i = x and W_i = w; zero for excluded units.
  double weight(int i, std::uint8_t x, std::uint8_t w) const;
};

/// Joint law of (W_i, W_j) given X_i = x_i, X_j = x_j; p[a][b] = P(W_i=a, W_j=b).
using JointExposure = std::array<std::array<double, 2>, 2>;

std::optional<JointExposure> exact_joint_exposure(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec,
                                                  int i, int j, std::uint8_t x_i, std::uint8_t x_j, int cap = 22);

/// E[u_i u_j | X_i = x_i, X_j = x_j]. For i == j this is E[u_i^2 | X_i].
/// Returns nullopt when the enumeration cap is exceeded.
std::optional<double> exact_pair_moment(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec,
                                        const UDefinition& u, int i, int j, std::uint8_t x_i, std::uint8_t x_j,
                                        int cap = 22);

McEstimate mc_pair_moment(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec, const UDefinition& u,
                          int i, int j, std::uint8_t x_i, std::uint8_t x_j, int replications, std::uint64_t seed);

struct QMatrix {
  Eigen::MatrixXd q;
  long exact_entries = 0;  // counted over the upper triangle incl. diagonal
  long mc_entries = 0;
  long zero_entries = 0;   // rows/columns of excluded units
  double max_std_error = 0.0;

  int size() const { return static_cast<int>(q.rows()); }
};

/// Q_ij = E[u_i u_j | X_i, X_j] at the observed assignment.
QMatrix build_Q(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec, const UDefinition& u,
                const Assignment& x_observed, const EngineConfig& cfg);

/// E[u_i u_j | X_i = a, X_j = b] for all four (a, b), so that Q can be
/// assembled for any assignment without recomputation. Cells that cannot
/// occur under the design are zero.
struct QMoments {
  std::array<std::array<Eigen::MatrixXd, 2>, 2> value;
  std::array<std::array<Eigen::MatrixXd, 2>, 2> std_error;
  std::array<std::array<std::vector<std::uint8_t>, 2>, 2> monte_carlo;  // row-major flags
  const PropensityTable* table = nullptr;
};

QMoments build_Q_moments(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec, const UDefinition& u,
                         const EngineConfig& cfg);

/// Same entries as build_Q at x.
QMatrix assemble_Q(const QMoments& m, const Assignment& x);

}  // namespace prevalence
