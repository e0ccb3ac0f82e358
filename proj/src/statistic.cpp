#include "prevalence/statistic.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "prevalence/hypothesis.hpp"

namespace prevalence {

UVector build_u(Variant variant, const Assignment& x, const ExposureVector& w, const PropensityTable& table) {
  const int n = table.size();
  if (static_cast<int>(x.size()) != n || static_cast<int>(w.size()) != n)
    throw std::invalid_argument("build_u: dimension mismatch");
  UVector out;
  out.variant = variant;
  out.table = &table;
  out.u = Eigen::VectorXd::Zero(n);
  out.excluded.assign(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (table.excluded(i)) {
      out.excluded[idx] = 1;
      continue;
    }
    const double p1 = table.p1(i, x[idx]);
    if (p1 <= 0.0 || p1 >= 1.0)
      throw std::invalid_argument("build_u: degenerate propensity " + std::to_string(p1) + " at unit " +
                                  std::to_string(i));
    out.u[i] = unit_weight(variant, p1, w[idx]);
  }
  return out;
}

double sqrt_pos(double v) { return v >= 0.0 ? std::sqrt(v) : -std::numeric_limits<double>::infinity(); }

Eigen::VectorXd to_vector(const std::vector<std::uint8_t>& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

PointEstimate point_estimate(const UVector& u, const OutcomeVector& y) {
  if (static_cast<int>(y.size()) != u.size()) throw std::invalid_argument("point_estimate: dimension mismatch");
  const double norm = u.sup_norm();
  if (norm == 0.0) throw std::invalid_argument("point_estimate: u is identically zero (no informative units)");
  const Eigen::VectorXd centered = to_vector(y).array() - 0.5;
  PointEstimate est;
  est.units = std::abs(u.u.dot(centered)) / norm;
  est.fraction = est.units / static_cast<double>(y.size());
  return est;
}

double tau(const UVector& u, const ThetaVector& theta) {
  if (theta.size() != u.u.size()) throw std::invalid_argument("tau: dimension mismatch");
  return u.u.dot(theta);
}

double variance_estimate(const QMatrix& q, const ThetaVector& theta) {
  if (theta.size() != q.q.rows()) throw std::invalid_argument("variance_estimate: dimension mismatch");
  return theta.dot(q.q * theta);
}

double holder_bound(const UVector& u, const OutcomeVector& y, const OutcomeVector& theta_star) {
  if (static_cast<int>(y.size()) != u.size() || y.size() != theta_star.size())
    throw std::invalid_argument("holder_bound: dimension mismatch");
  const double norm = u.sup_norm();
  if (norm == 0.0) throw std::invalid_argument("holder_bound: u is identically zero");
  return std::abs(u.u.dot(to_vector(y) - to_vector(theta_star))) / norm;
}

int psi(const OutcomeVector& y, const OutcomeVector& theta_star) {
  if (y.size() != theta_star.size()) throw std::invalid_argument("psi: dimension mismatch");
  int count = 0;
  for (std::size_t i = 0; i < y.size(); ++i) count += y[i] != theta_star[i];
  return count;
}

}  // namespace prevalence
