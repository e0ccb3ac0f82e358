#pragma once

#include <Eigen/Dense>
#include <string>

#include "prevalence/propensity.hpp"
#include "prevalence/statistic.hpp"

namespace prevalence {

struct SolverConfig {
  double psd_tol = 1e-8;
  double constraint_tol = 1e-9;
  double objective_tol = 1e-6;  // target duality gap of the relaxation, in units
  int max_iterations = 400;     // interior-point iterations of the relaxation
  double barrier_initial_weight = 1.0;  // initial complementarity per constraint
  double barrier_decrease = 0.5;  // target reduction of the barrier weight per iteration
  bool refine_majorizer = true;
  int refine_max_iterations = 30;  // Newton steps of the majorizer refinement
};

struct PsdCertificate {
  double lambda_max = 0.0;     // power-iteration estimate of lambda_max(Q - D)
  int power_iterations = 0;
  bool cholesky_verified = false;  // D - Q + psd_tol * I factorized
  double tolerance = 0.0;
  bool valid() const { return cholesky_verified && lambda_max <= tolerance; }
};

/// Diagonal D >= 0 with Q - D negative semidefinite.
struct DiagonalMajorizer {
  Eigen::VectorXd d;
  PsdCertificate certificate;
  std::string method;
  double trace() const { return d.sum(); }
};

/// Largest eigenvalue of a symmetric matrix by power iteration on the
/// shifted matrix A + sigma I, with sigma a Gershgorin bound on -lambda_min.
double power_lambda_max(const Eigen::MatrixXd& a, int max_iterations, double tol, int* iterations = nullptr);

PsdCertificate certify_majorizer(const Eigen::MatrixXd& q, const Eigen::VectorXd& d, double psd_tol);

/// D_ii = sum_j |Q_ij|. Throws std::logic_error if the certificate fails.
DiagonalMajorizer gershgorin_majorizer(const Eigen::MatrixXd& q, double psd_tol = 1e-8);

/// Lowers trace(D) while keeping Q - D negative semidefinite. Returns d0
/// when no certified improvement is found.
DiagonalMajorizer refine_majorizer(const Eigen::MatrixXd& q, const DiagonalMajorizer& d0, const SolverConfig& cfg);

struct RelaxationResult {
  double value = 0.0;         // certified lower bound, clamped to [0, N]
  double primal_value = 0.0;  // objective at theta
  double gap = 0.0;           // primal - certified bound
  Eigen::VectorXd theta;
  int iterations = 0;
  double constraint_residual = 0.0;  // max(0, g(theta))
  std::string status;
};

/// Globally lower-bounds
///   min sum |Y_i - theta_i|  s.t.  |u^T theta| <= z sqrt+(theta^T (Q-D) theta + sum D_ii theta_i)
/// over theta in [0,1]^N via a log-barrier method and a Lagrangian certificate.
RelaxationResult solve_relaxation(const UVector& u, const Eigen::MatrixXd& q, const DiagonalMajorizer& d,
                                  const OutcomeVector& y, double z, const SolverConfig& cfg);

/// Exact optimum of min sum |Y_i - theta_i| s.t. |u^T theta| <= bound over
/// theta in [0,1]^N (fractional knapsack).
double solve_linear_bound(const Eigen::VectorXd& u, const OutcomeVector& y, double bound);

/// The Chebyshev backup program with bound N^(1/3).
double solve_backup(const UVector& u, const OutcomeVector& y, int n);

/// True when the binary theta satisfies |u^T theta| <= z sqrt+(theta^T Q theta).
bool in_confidence_set(const UVector& u, const Eigen::MatrixXd& q, const Eigen::VectorXd& theta, double z);

/// z at 1 - alpha; the matching one-sided level is 1 - 2 alpha.
double z_quantile(double alpha);

struct IntervalResult {
  double lower_bound_units = 0.0;
  double lower_bound_fraction = 0.0;
  double alpha = 0.0;
  double confidence_level = 0.0;
  double z_quantile = 0.0;
  std::string active_program;  // "relaxation" or "backup"
  double relaxation_value = 0.0;
  double backup_value = 0.0;
  Eigen::VectorXd theta_argmin;
  RelaxationResult relaxation;
  DiagonalMajorizer majorizer;
};

IntervalResult combined_interval(const UVector& u, const QMatrix& q, const OutcomeVector& y, double alpha,
                                 const SolverConfig& cfg);

/// Same, reusing a majorizer computed for q.
IntervalResult combined_interval(const UVector& u, const QMatrix& q, const DiagonalMajorizer& d,
                                 const OutcomeVector& y, double alpha, const SolverConfig& cfg);

/// Certified Gershgorin majorizer, refined when cfg.refine_majorizer is set.
DiagonalMajorizer extract_majorizer(const Eigen::MatrixXd& q, const SolverConfig& cfg);

}  // namespace prevalence
