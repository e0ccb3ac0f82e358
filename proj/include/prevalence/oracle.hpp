#pragma once

// Brute-force references for small instances. Everything here enumerates;
// nothing here is used by the inference path.

#include <Eigen/Dense>
#include <cstdint>
#include <variant>
#include <vector>

#include "prevalence/design.hpp"
#include "prevalence/exposure.hpp"
#include "prevalence/graph.hpp"
#include "prevalence/propensity.hpp"
#include "prevalence/statistic.hpp"

namespace prevalence {

/// Y_i = 1{ baseline_i + direct_i X_i + spillover_i W_i^true >= 1 }.
struct ThresholdResponse {
  std::vector<double> baseline;
  std::vector<double> direct;
  std::vector<double> spillover;
  AdjacencyGraph true_graph;
  ExposureSpec true_exposure;
};

/// Arbitrary outcome map for tiny N: outcomes[mask] is Y under the
/// assignment whose bit k is X_k.
struct LookupTable {
  int n_units = 0;
  std::vector<OutcomeVector> outcomes;
};

using PotentialOutcomeModel = std::variant<ThresholdResponse, LookupTable>;

enum class Level { unit, cluster };

int model_size(const PotentialOutcomeModel& m);

/// Y = f(x).
OutcomeVector realize_outcomes(const PotentialOutcomeModel& m, const Assignment& x);

/// theta*_i = f_i evaluated at the isolated assignment for i: X_i (or i's
/// cluster) kept, everything else set to control. `d` supplies the clusters
/// at Level::cluster and is ignored otherwise.
OutcomeVector true_theta_star(const PotentialOutcomeModel& m, const Assignment& x, Level level,
                              const Design* d = nullptr);

int true_psi(const PotentialOutcomeModel& m, const Assignment& x, Level level, const Design* d = nullptr);

struct TauMoments {
  double mean = 0.0;
  double variance = 0.0;
  long support = 0;
};

/// Mean and variance of tau = u^T theta* over the full support, rebuilding W,
/// u and theta* per assignment.
TauMoments exact_tau_moments(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec,
                             const UDefinition& u, const PotentialOutcomeModel& m, Level level,
                             std::uint64_t cap = 1000000);

double exact_var_tau(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec, const UDefinition& u,
                     const PotentialOutcomeModel& m, Level level, std::uint64_t cap = 1000000);

/// P(W_i = 1 | X_i = x) averaged over the support.
double enumerate_propensity(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec, int i, std::uint8_t x,
                            std::uint64_t cap = 1000000);

/// E[u_i | X_i = x] over the support.
double enumerate_u_mean(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec, const UDefinition& u,
                        int i, std::uint8_t x, std::uint64_t cap = 1000000);

/// Q at x_observed with every entry averaged over the matching assignments.
Eigen::MatrixXd enumerate_Q(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec,
                            const UDefinition& u, const Assignment& x_observed, std::uint64_t cap = 1000000);

/// min over binary theta of sum |Y_i - theta_i| s.t. |u^T theta| <= z sqrt+(theta^T Q theta).
double integer_optimum(const Eigen::VectorXd& u, const Eigen::MatrixXd& q, const OutcomeVector& y, double z,
                       int n_cap = 15);

struct LpResult {
  enum class Status { optimal, infeasible, unbounded };
  Status status = Status::optimal;
  double value = 0.0;
  Eigen::VectorXd x;
};

/// min c^T x s.t. A x <= b, x >= 0, by a dense two-phase simplex with
/// Bland's rule. Meant for a few dozen variables.
LpResult simplex_lp(const Eigen::VectorXd& c, const Eigen::MatrixXd& a, const Eigen::VectorXd& b);

/// min sum |Y_i - theta_i| s.t. |u^T theta| <= bound, theta in [0,1]^N, as a
/// general LP.
double linear_bound_lp(const Eigen::VectorXd& u, const OutcomeVector& y, double bound);

}  // namespace prevalence
