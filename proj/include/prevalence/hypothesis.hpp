#pragma once

// Quantities that need a hypothesized or model-known counterfactual theta.
// Kept apart from the data-only estimators so simulations cannot leak theta*
// into the inference path by accident.

#include "prevalence/propensity.hpp"
#include "prevalence/statistic.hpp"

namespace prevalence {

/// u^T theta.
double tau(const UVector& u, const ThetaVector& theta);

/// theta^T Q theta.
double variance_estimate(const QMatrix& q, const ThetaVector& theta);

/// |u^T (Y - theta*)| / ||u||_inf, a lower bound on psi.
double holder_bound(const UVector& u, const OutcomeVector& y, const OutcomeVector& theta_star);

/// Number of units with Y_i != theta*_i.
int psi(const OutcomeVector& y, const OutcomeVector& theta_star);

}  // namespace prevalence
