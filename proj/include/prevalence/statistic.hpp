#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "prevalence/design.hpp"
#include "prevalence/exposure.hpp"
#include "prevalence/propensity.hpp"
#include "prevalence/weights.hpp"

namespace prevalence {

using OutcomeVector = std::vector<std::uint8_t>;
using ThetaVector = Eigen::VectorXd;

struct UVector {
  Eigen::VectorXd u;
  Variant variant = Variant::ipw;
  std::vector<std::uint8_t> excluded;
  const PropensityTable* table = nullptr;

  int size() const { return static_cast<int>(u.size()); }
  double sup_norm() const { return u.size() ? u.cwiseAbs().maxCoeff() : 0.0; }
};

/// Weight vector of the chosen statistic at the observed (x, w). Throws
/// std::invalid_argument naming the unit when a non-excluded unit has a
/// propensity of exactly 0 or 1 at its observed treatment.
UVector build_u(Variant variant, const Assignment& x, const ExposureVector& w, const PropensityTable& table);

/// sqrt(v) for v >= 0, -infinity otherwise.
double sqrt_pos(double v);

struct PointEstimate {
  double units = 0.0;
  double fraction = 0.0;
};

/// |u^T (Y - 1/2)| / ||u||_inf. Data-only. Throws when u is identically zero.
PointEstimate point_estimate(const UVector& u, const OutcomeVector& y);

Eigen::VectorXd to_vector(const std::vector<std::uint8_t>& v);

}  // namespace prevalence
