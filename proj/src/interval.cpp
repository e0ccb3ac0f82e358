#include "prevalence/interval.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace prevalence {

double power_lambda_max(const Eigen::MatrixXd& a, int max_iterations, double tol, int* iterations) {
  const Eigen::Index n = a.rows();
  if (iterations) *iterations = 0;
  if (n == 0) return 0.0;
  const double sigma = a.cwiseAbs().rowwise().sum().maxCoeff();
  if (sigma == 0.0) return 0.0;
  // B = A + sigma I is positive semidefinite, so its dominant eigenvalue is
  // lambda_max(A) + sigma.
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = 1.0 + 0.01 * static_cast<double>(i % 7);
  v.normalize();
  double lambda = 0.0;
  int it = 0;
  for (; it < max_iterations; ++it) {
    Eigen::VectorXd w = a * v + sigma * v;
    const double next = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) {
      lambda = 0.0;
      break;
    }
    v = w / norm;
    if (it > 0 && std::abs(next - lambda) <= tol * sigma) {
      lambda = next;
      ++it;
      break;
    }
    lambda = next;
  }
  if (iterations) *iterations = it;
  return lambda - sigma;
}

PsdCertificate certify_majorizer(const Eigen::MatrixXd& q, const Eigen::VectorXd& d, double psd_tol) {
  PsdCertificate cert;
  cert.tolerance = psd_tol;
  if ((d.array() < 0.0).any()) return cert;
  Eigen::MatrixXd diff = q;
  diff.diagonal() -= d;
  cert.lambda_max = power_lambda_max(diff, 2000, 1e-13, &cert.power_iterations);
  Eigen::MatrixXd shifted = -diff;
  shifted.diagonal().array() += psd_tol;
  Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  cert.cholesky_verified = llt.info() == Eigen::Success;
  return cert;
}

DiagonalMajorizer gershgorin_majorizer(const Eigen::MatrixXd& q, double psd_tol) {
  if (!q.isApprox(q.transpose(), 1e-12) && q.size() > 0)
    throw std::invalid_argument("gershgorin_majorizer: Q is not symmetric");
  DiagonalMajorizer m;
  m.method = "gershgorin";
  m.d = q.cwiseAbs().rowwise().sum();
  m.certificate = certify_majorizer(q, m.d, psd_tol);
  if (!m.certificate.valid())
    throw std::logic_error("gershgorin_majorizer: certificate failed (lambda_max = " +
                           std::to_string(m.certificate.lambda_max) + ")");
  return m;
}

namespace {

// Central path of  min t * sum(d) - log det(diag(d) - Q)  over the active
// coordinates; every iterate is strictly feasible.
Eigen::VectorXd barrier_majorizer(const Eigen::MatrixXd& q, const Eigen::VectorXd& d0, const SolverConfig& cfg) {
  const Eigen::Index n = q.rows();
  const double scale = d0.mean();
  Eigen::VectorXd d = d0.array() + std::max(1e-6 * scale, 1e-12);
  Eigen::VectorXd best = d;

  auto slack = [&](const Eigen::VectorXd& dd) {
    Eigen::MatrixXd s = -q;
    s.diagonal() += dd;
    return s;
  };
  auto log_det = [](const Eigen::LLT<Eigen::MatrixXd>& llt) {
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  };

  double t = static_cast<double>(n) / d.sum();
  constexpr double growth = 10.0;
  int iterations = 0;
  Eigen::LLT<Eigen::MatrixXd> llt(slack(d));
  if (llt.info() != Eigen::Success) return d0;

  while (iterations < cfg.refine_max_iterations) {
    // centering
    for (; iterations < cfg.refine_max_iterations; ++iterations) {
      const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
      const Eigen::VectorXd grad = t * Eigen::VectorXd::Ones(n) - inv.diagonal();
      const Eigen::MatrixXd hess = inv.cwiseProduct(inv);
      Eigen::LDLT<Eigen::MatrixXd> solver(hess);
      const Eigen::VectorXd step = -solver.solve(grad);
      const double decrement = -grad.dot(step);
      if (!std::isfinite(decrement) || decrement < 1e-10) break;
      const double f0 = t * d.sum() - log_det(llt);
      double s = 1.0;
      bool moved = false;
      for (int k = 0; k < 50; ++k, s *= 0.5) {
        const Eigen::VectorXd trial = d + s * step;
        Eigen::LLT<Eigen::MatrixXd> trial_llt(slack(trial));
        if (trial_llt.info() != Eigen::Success) continue;
        const double f1 = t * trial.sum() - log_det(trial_llt);
        if (f1 <= f0 - 0.25 * s * decrement) {
          d = trial;
          llt = trial_llt;
          moved = true;
          break;
        }
      }
      if (!moved) break;
      if (d.sum() < best.sum()) best = d;
    }
    if (static_cast<double>(n) / t <= 1e-9 * std::max(1.0, d.sum())) break;
    t *= growth;
  }
  return best;
}

double dot_y(const Eigen::VectorXd& u, const OutcomeVector& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += u[static_cast<Eigen::Index>(i)] * y[i];
  return s;
}

}  // namespace

DiagonalMajorizer refine_majorizer(const Eigen::MatrixXd& q, const DiagonalMajorizer& d0, const SolverConfig& cfg) {
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < d0.d.size(); ++i)
    if (d0.d[i] > 0.0) active.push_back(i);
  if (active.empty()) return d0;

  const auto n = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd qa(n, n);
  Eigen::VectorXd da(n);
  for (Eigen::Index a = 0; a < n; ++a) {
    da[a] = d0.d[active[static_cast<std::size_t>(a)]];
    for (Eigen::Index b = 0; b < n; ++b) qa(a, b) = q(active[static_cast<std::size_t>(a)], active[static_cast<std::size_t>(b)]);
  }
  const Eigen::VectorXd refined = barrier_majorizer(qa, da, cfg);
  if (refined.sum() >= da.sum()) return d0;

  DiagonalMajorizer out;
  out.method = "barrier-refined";
  out.d = Eigen::VectorXd::Zero(d0.d.size());
  for (Eigen::Index a = 0; a < n; ++a) out.d[active[static_cast<std::size_t>(a)]] = refined[a];
  out.certificate = certify_majorizer(q, out.d, cfg.psd_tol);
  if (!out.certificate.valid()) return d0;
  return out;
}

DiagonalMajorizer extract_majorizer(const Eigen::MatrixXd& q, const SolverConfig& cfg) {
  DiagonalMajorizer d = gershgorin_majorizer(q, cfg.psd_tol);
  if (cfg.refine_majorizer) d = refine_majorizer(q, d, cfg);
  return d;
}

double solve_linear_bound(const Eigen::VectorXd& u, const OutcomeVector& y, double bound) {
  const double s = dot_y(u, y);
  if (std::abs(s) <= bound) return 0.0;
  const double sign = s > 0 ? 1.0 : -1.0;
  double needed = std::abs(s) - bound;
  // coordinates whose move toward the other endpoint lowers sign * u^T theta
  std::vector<Eigen::Index> movable;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double su = sign * u[i];
    const bool at_one = y[static_cast<std::size_t>(i)] == 1;
    if ((su > 0 && at_one) || (su < 0 && !at_one)) movable.push_back(i);
  }
  std::stable_sort(movable.begin(), movable.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return std::abs(u[a]) > std::abs(u[b]); });
  double cost = 0.0;
  for (Eigen::Index i : movable) {
    const double gain = std::abs(u[i]);
    if (gain >= needed) return cost + needed / gain;
    cost += 1.0;
    needed -= gain;
  }
  return std::numeric_limits<double>::infinity();
}

double solve_backup(const UVector& u, const OutcomeVector& y, int n) {
  if (static_cast<int>(y.size()) != u.size()) throw std::invalid_argument("solve_backup: dimension mismatch");
  return solve_linear_bound(u.u, y, std::cbrt(static_cast<double>(n)));
}

bool in_confidence_set(const UVector& u, const Eigen::MatrixXd& q, const Eigen::VectorXd& theta, double z) {
  return std::abs(u.u.dot(theta)) <= z * sqrt_pos(theta.dot(q * theta));
}

double z_quantile(double alpha) {
  if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("alpha must lie in (0, 0.5)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - alpha);
}

RelaxationResult solve_relaxation(const UVector& u, const Eigen::MatrixXd& q, const DiagonalMajorizer& dm,
                                  const OutcomeVector& y, double z, const SolverConfig& cfg) {
  const Eigen::Index n_all = u.u.size();
  if (q.rows() != n_all || dm.d.size() != n_all || static_cast<Eigen::Index>(y.size()) != n_all)
    throw std::invalid_argument("solve_relaxation: dimension mismatch");
  if (!(z > 0)) throw std::invalid_argument("solve_relaxation: z must be positive");
  RelaxationResult res;
  const Eigen::VectorXd yv = to_vector(y);
  res.theta = yv;

  if (in_confidence_set(u, q, yv, z)) {
    res.status = "observed outcomes in confidence set";
    return res;
  }
  if (dm.d.sum() <= cfg.psd_tol) {
    res.value = res.primal_value = solve_linear_bound(u.u, y, 0.0);
    res.status = "degenerate majorizer: solved u^T theta = 0 program";
    return res;
  }

  // Coordinates outside the constraint keep theta_i = Y_i at zero cost.
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < n_all; ++i)
    if (dm.d[i] > 0.0 || u.u[i] != 0.0) active.push_back(i);
  const auto n = static_cast<Eigen::Index>(active.size());
  Eigen::VectorXd ua(n), da(n), c(n);
  Eigen::MatrixXd m(n, n);
  double y_active = 0.0;
  for (Eigen::Index a = 0; a < n; ++a) {
    const Eigen::Index i = active[static_cast<std::size_t>(a)];
    ua[a] = u.u[i];
    da[a] = dm.d[i];
    c[a] = 1.0 - 2.0 * yv[i];
    y_active += yv[i];
    for (Eigen::Index b = 0; b < n; ++b) m(a, b) = -q(i, active[static_cast<std::size_t>(b)]);
    m(a, a) += dm.d[i];
  }
  const double z2 = z * z;
  // g(theta) = (u^T theta)^2 / z^2 + theta^T (D - Q) theta - d^T theta
  auto g = [&](const Eigen::VectorXd& th) { return std::pow(ua.dot(th), 2) / z2 + th.dot(m * th) - da.dot(th); };
  auto grad_g = [&](const Eigen::VectorXd& th) -> Eigen::VectorXd {
    return (2.0 * ua.dot(th) / z2) * ua + 2.0 * (m * th) - da;
  };
  Eigen::MatrixXd a_mat = m + ua * ua.transpose() / z2;

  const double quad = a_mat.sum();
  double eps = quad > 0 ? std::min(0.5, 0.5 * da.sum() / quad) : 0.5;
  Eigen::VectorXd th = Eigen::VectorXd::Constant(n, eps);
  for (int k = 0; k < 200 && !(g(th) < 0.0); ++k) th *= 0.5;
  if (!(g(th) < 0.0)) {
    res.value = res.primal_value = solve_linear_bound(u.u, y, 0.0);
    res.status = "no strictly feasible point: solved u^T theta = 0 program";
    return res;
  }

  const double m_constraints = 2.0 * static_cast<double>(n) + 1.0;
  const double growth = 1.0 / std::clamp(cfg.barrier_decrease, 1e-3, 0.9);
  const double w0 = std::max(cfg.barrier_initial_weight, 1e-12);

  // Lagrangian certificate: for lambda >= 0 and f = c^T theta + lambda g,
  //   min over the feasible set >= f(theta) + min over the box of grad f(theta)^T (theta' - theta).
  // The right side is concave piecewise linear in lambda, so its maximum sits
  // at 0, at a breakpoint -c_i / grad g_i, or at the barrier multiplier.
  auto certify = [&](const Eigen::VectorXd& x, double lambda_barrier) {
    const double gx = g(x);
    const Eigen::VectorXd gg = grad_g(x);
    auto bound_at = [&](double lambda) {
      double b = c.dot(x) + lambda * gx;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double gf = c[i] + lambda * gg[i];
        b += std::min(-gf * x[i], gf * (1.0 - x[i]));
      }
      return b;
    };
    double best = bound_at(0.0);
    if (lambda_barrier > 0.0) best = std::max(best, bound_at(lambda_barrier));
    for (Eigen::Index i = 0; i < n; ++i) {
      if (gg[i] == 0.0) continue;
      const double lambda = -c[i] / gg[i];
      if (lambda > 0.0 && std::isfinite(lambda)) best = std::max(best, bound_at(lambda));
    }
    return best;
  };

  // Primal-dual interior point on  min c^T theta  s.t.  g(theta) <= 0, 0 <= theta <= 1.
  double lam_g = w0 / (-g(th));
  Eigen::ArrayXd lam_lo = w0 / th.array();
  Eigen::ArrayXd lam_hi = w0 / (1.0 - th.array());

  auto residual_norm = [&](const Eigen::VectorXd& x, double lg, const Eigen::ArrayXd& llo, const Eigen::ArrayXd& lhi,
                           double t) {
    const double gx = g(x);
    const Eigen::VectorXd dual = c + lg * grad_g(x) - llo.matrix() + lhi.matrix();
    double cent = std::pow(lg * (-gx) - 1.0 / t, 2);
    cent += (llo * x.array() - 1.0 / t).square().sum();
    cent += (lhi * (1.0 - x.array()) - 1.0 / t).square().sum();
    return std::sqrt(dual.squaredNorm() + cent);
  };

  double best_bound = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  for (; iterations < cfg.max_iterations; ++iterations) {
    const double gx = g(th);
    const Eigen::VectorXd gg = grad_g(th);
    best_bound = std::max(best_bound, certify(th, lam_g));
    if (c.dot(th) - best_bound <= cfg.objective_tol) {
      converged = true;
      break;
    }
    const Eigen::ArrayXd x = th.array();
    const double eta = lam_g * (-gx) + (lam_lo * x).sum() + (lam_hi * (1.0 - x)).sum();
    const double t = growth * m_constraints / eta;

    Eigen::MatrixXd h = (2.0 * lam_g) * a_mat + (lam_g / (-gx)) * gg * gg.transpose();
    h.diagonal() += (lam_lo / x + lam_hi / (1.0 - x)).matrix();
    const Eigen::VectorXd rhs =
        -(c + gg / (t * (-gx)) - (1.0 / (t * x)).matrix() + (1.0 / (t * (1.0 - x))).matrix());
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    if (llt.info() != Eigen::Success) break;
    const Eigen::VectorXd dx = llt.solve(rhs);
    const Eigen::ArrayXd dxa = dx.array();
    const double d_lam_g = (lam_g / (-gx)) * gg.dot(dx) - lam_g + 1.0 / (t * (-gx));
    const Eigen::ArrayXd d_lam_lo = -lam_lo * dxa / x - lam_lo + 1.0 / (t * x);
    const Eigen::ArrayXd d_lam_hi = lam_hi * dxa / (1.0 - x) - lam_hi + 1.0 / (t * (1.0 - x));

    double s = 1.0;
    if (d_lam_g < 0) s = std::min(s, -lam_g / d_lam_g);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d_lam_lo[i] < 0) s = std::min(s, -lam_lo[i] / d_lam_lo[i]);
      if (d_lam_hi[i] < 0) s = std::min(s, -lam_hi[i] / d_lam_hi[i]);
      if (dx[i] < 0) s = std::min(s, -th[i] / dx[i]);
      if (dx[i] > 0) s = std::min(s, (1.0 - th[i]) / dx[i]);
    }
    {
      // g is quadratic along dx: g + s gd + s^2 qd
      const double gd = gg.dot(dx);
      const double qd = dx.dot(a_mat * dx);
      if (qd > 0.0) {
        const double root = (-gd + std::sqrt(gd * gd - 4.0 * qd * gx)) / (2.0 * qd);
        s = std::min(s, root);
      } else if (gd > 0.0) {
        s = std::min(s, -gx / gd);
      }
    }
    s *= 0.99;
    const double r0 = residual_norm(th, lam_g, lam_lo, lam_hi, t);
    bool moved = false;
    for (int k = 0; k < 60; ++k, s *= 0.5) {
      const Eigen::VectorXd trial = th + s * dx;
      if (!(g(trial) < 0.0)) continue;
      const double lg = lam_g + s * d_lam_g;
      const Eigen::ArrayXd llo = lam_lo + s * d_lam_lo;
      const Eigen::ArrayXd lhi = lam_hi + s * d_lam_hi;
      if (residual_norm(trial, lg, llo, lhi, t) <= (1.0 - 0.01 * s) * r0) {
        th = trial;
        lam_g = lg;
        lam_lo = llo;
        lam_hi = lhi;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  res.iterations = iterations;

  best_bound = std::max(best_bound, certify(th, lam_g));
  res.primal_value = y_active + c.dot(th);
  const double lower = y_active + best_bound;
  res.gap = res.primal_value - lower;
  res.value = std::clamp(lower, 0.0, static_cast<double>(n_all));
  res.constraint_residual = std::max(0.0, g(th));
  res.theta = yv;
  for (Eigen::Index a = 0; a < n; ++a) res.theta[active[static_cast<std::size_t>(a)]] = th[a];
  res.status = converged ? "converged" : "stopped early; bound remains certified";
  return res;
}

IntervalResult combined_interval(const UVector& u, const QMatrix& q, const DiagonalMajorizer& d,
                                 const OutcomeVector& y, double alpha, const SolverConfig& cfg) {
  IntervalResult r;
  r.alpha = alpha;
  r.z_quantile = z_quantile(alpha);
  r.confidence_level = 1.0 - 2.0 * alpha;
  r.majorizer = d;
  r.relaxation = solve_relaxation(u, q.q, d, y, r.z_quantile, cfg);
  r.relaxation_value = r.relaxation.value;
  r.backup_value = solve_backup(u, y, u.size());
  r.theta_argmin = r.relaxation.theta;
  if (r.relaxation_value <= r.backup_value) {
    r.active_program = "relaxation";
    r.lower_bound_units = r.relaxation_value;
  } else {
    r.active_program = "backup";
    r.lower_bound_units = r.backup_value;
  }
  r.lower_bound_units = std::clamp(r.lower_bound_units, 0.0, static_cast<double>(u.size()));
  r.lower_bound_fraction = u.size() ? r.lower_bound_units / u.size() : 0.0;
  return r;
}

IntervalResult combined_interval(const UVector& u, const QMatrix& q, const OutcomeVector& y, double alpha,
                                 const SolverConfig& cfg) {
  return combined_interval(u, q, extract_majorizer(q.q, cfg), y, alpha, cfg);
}

}  // namespace prevalence
