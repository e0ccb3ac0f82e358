#include "prevalence/oracle.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "prevalence/hypothesis.hpp"
#include "prevalence/statistic.hpp"

namespace prevalence {

namespace {

std::uint64_t to_mask(const Assignment& x) {
  std::uint64_t mask = 0;
  for (std::size_t k = 0; k < x.size(); ++k)
    if (x[k]) mask |= std::uint64_t{1} << k;
  return mask;
}

Assignment isolated(const Assignment& x, int i, Level level, const Design* d) {
  Assignment iso(x.size(), 0);
  if (level == Level::cluster) {
    if (!d) throw std::invalid_argument("cluster-level theta* needs the design");
    for (int k : d->units_of_block(d->block_of(i))) iso[static_cast<std::size_t>(k)] = x[static_cast<std::size_t>(k)];
  } else {
    iso[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)];
  }
  return iso;
}

std::uint8_t threshold_outcome(const ThresholdResponse& m, const Assignment& x, int i) {
  int treated = 0;
  for (int j : m.true_graph.out_neighbors(i)) treated += x[static_cast<std::size_t>(j)];
  const auto w = exposure_from_count(m.true_graph, m.true_exposure, i, treated);
  const auto k = static_cast<std::size_t>(i);
  return m.baseline[k] + m.direct[k] * x[k] + m.spillover[k] * w >= 1.0 ? 1 : 0;
}

std::uint8_t unit_outcome(const PotentialOutcomeModel& m, const Assignment& x, int i) {
  if (const auto* t = std::get_if<ThresholdResponse>(&m)) return threshold_outcome(*t, x, i);
  const auto& lt = std::get<LookupTable>(m);
  return lt.outcomes[to_mask(x)][static_cast<std::size_t>(i)];
}

std::vector<double> unit_weights(const AdjacencyGraph& g, const ExposureSpec& spec, const UDefinition& u,
                                 const Assignment& x) {
  const ExposureVector w = compute_exposure(g, spec, x);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = u.weight(static_cast<int>(i), x[i], w[i]);
  return out;
}

}  // namespace

int model_size(const PotentialOutcomeModel& m) {
  if (const auto* t = std::get_if<ThresholdResponse>(&m)) return static_cast<int>(t->baseline.size());
  return std::get<LookupTable>(m).n_units;
}

OutcomeVector realize_outcomes(const PotentialOutcomeModel& m, const Assignment& x) {
  if (static_cast<int>(x.size()) != model_size(m)) throw std::invalid_argument("realize_outcomes: size mismatch");
  OutcomeVector y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = unit_outcome(m, x, static_cast<int>(i));
  return y;
}

OutcomeVector true_theta_star(const PotentialOutcomeModel& m, const Assignment& x, Level level, const Design* d) {
  if (static_cast<int>(x.size()) != model_size(m)) throw std::invalid_argument("true_theta_star: size mismatch");
  OutcomeVector theta(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const int k = static_cast<int>(i);
    theta[i] = unit_outcome(m, isolated(x, k, level, d), k);
  }
  return theta;
}

int true_psi(const PotentialOutcomeModel& m, const Assignment& x, Level level, const Design* d) {
  return psi(realize_outcomes(m, x), true_theta_star(m, x, level, d));
}

TauMoments exact_tau_moments(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec,
                             const UDefinition& u, const PotentialOutcomeModel& m, Level level, std::uint64_t cap) {
  std::vector<double> taus;
  enumerate_assignments(d, cap, [&](const Assignment& x) {
    const auto weights = unit_weights(g, spec, u, x);
    const OutcomeVector theta = true_theta_star(m, x, level, &d);
    double t = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) t += weights[i] * theta[i];
    taus.push_back(t);
  });
  TauMoments out;
  out.support = static_cast<long>(taus.size());
  for (double t : taus) out.mean += t;
  out.mean /= static_cast<double>(taus.size());
  for (double t : taus) out.variance += (t - out.mean) * (t - out.mean);
  out.variance /= static_cast<double>(taus.size());
  return out;
}

double exact_var_tau(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec, const UDefinition& u,
                     const PotentialOutcomeModel& m, Level level, std::uint64_t cap) {
  return exact_tau_moments(d, g, spec, u, m, level, cap).variance;
}

double enumerate_propensity(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec, int i, std::uint8_t x,
                            std::uint64_t cap) {
  long hits = 0, total = 0;
  enumerate_assignments(d, cap, [&](const Assignment& a) {
    if (a[static_cast<std::size_t>(i)] != x) return;
    ++total;
    hits += compute_exposure(g, spec, a)[static_cast<std::size_t>(i)];
  });
  if (total == 0) throw InfeasibleCondition("enumerate_propensity: no assignment matches");
  return static_cast<double>(hits) / static_cast<double>(total);
}

double enumerate_u_mean(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec, const UDefinition& u,
                        int i, std::uint8_t x, std::uint64_t cap) {
  double sum = 0.0;
  long total = 0;
  enumerate_assignments(d, cap, [&](const Assignment& a) {
    if (a[static_cast<std::size_t>(i)] != x) return;
    ++total;
    sum += u.weight(i, x, compute_exposure(g, spec, a)[static_cast<std::size_t>(i)]);
  });
  if (total == 0) throw InfeasibleCondition("enumerate_u_mean: no assignment matches");
  return sum / static_cast<double>(total);
}

Eigen::MatrixXd enumerate_Q(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec,
                            const UDefinition& u, const Assignment& x_observed, std::uint64_t cap) {
  const auto n = static_cast<Eigen::Index>(x_observed.size());
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd count = Eigen::MatrixXd::Zero(n, n);
  enumerate_assignments(d, cap, [&](const Assignment& a) {
    const auto weights = unit_weights(g, spec, u, a);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (a[static_cast<std::size_t>(i)] != x_observed[static_cast<std::size_t>(i)]) continue;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (a[static_cast<std::size_t>(j)] != x_observed[static_cast<std::size_t>(j)]) continue;
        sum(i, j) += weights[static_cast<std::size_t>(i)] * weights[static_cast<std::size_t>(j)];
        count(i, j) += 1.0;
      }
    }
  });
  // Pairs that never co-occur (e.g. two treated units with T = 1) have no
  // conditional law; they are left at zero.
  return sum.cwiseQuotient(count.cwiseMax(1.0));
}

double integer_optimum(const Eigen::VectorXd& u, const Eigen::MatrixXd& q, const OutcomeVector& y, double z,
                       int n_cap) {
  const auto n = static_cast<int>(y.size());
  if (n > n_cap) throw std::invalid_argument("integer_optimum: N exceeds the enumeration cap");
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd theta(n);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    double cost = 0.0;
    for (int i = 0; i < n; ++i) {
      theta[i] = (mask >> i) & 1U;
      cost += std::abs(y[static_cast<std::size_t>(i)] - theta[i]);
    }
    if (cost >= best) continue;
    if (std::abs(u.dot(theta)) <= z * sqrt_pos(theta.dot(q * theta))) best = cost;
  }
  return best;
}

LpResult simplex_lp(const Eigen::VectorXd& c, const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const auto m = a.rows();
  const auto n = a.cols();
  constexpr double eps = 1e-12;
  // Columns: n originals, m slacks, m artificials, then the right-hand side.
  const auto cols = n + 2 * m;
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, cols + 1);
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
  for (Eigen::Index r = 0; r < m; ++r) {
    const double sign = b[r] < 0 ? -1.0 : 1.0;
    t.block(r, 0, 1, n) = sign * a.row(r);
    t(r, n + r) = sign;
    t(r, n + m + r) = 1.0;
    t(r, cols) = sign * b[r];
    basis[static_cast<std::size_t>(r)] = n + m + r;
  }

  auto pivot = [&](Eigen::Index row, Eigen::Index col) {
    t.row(row) /= t(row, col);
    for (Eigen::Index r = 0; r < m; ++r)
      if (r != row && t(r, col) != 0.0) t.row(r) -= t(r, col) * t.row(row);
    basis[static_cast<std::size_t>(row)] = col;
  };

  // Returns false when unbounded.
  auto run = [&](const Eigen::VectorXd& cost, Eigen::Index usable) {
    for (int iter = 0; iter < 10000; ++iter) {
      Eigen::VectorXd reduced = cost.head(cols);
      for (Eigen::Index r = 0; r < m; ++r) reduced -= cost[basis[static_cast<std::size_t>(r)]] * t.row(r).head(cols).transpose();
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < usable; ++j)
        if (reduced[j] < -1e-10) {
          enter = j;
          break;
        }
      if (enter < 0) return true;
      Eigen::Index leave = -1;
      double ratio = std::numeric_limits<double>::infinity();
      for (Eigen::Index r = 0; r < m; ++r) {
        if (t(r, enter) <= eps) continue;
        const double q = t(r, cols) / t(r, enter);
        if (q < ratio - eps || (std::abs(q - ratio) <= eps && basis[static_cast<std::size_t>(r)] < basis[static_cast<std::size_t>(leave)])) {
          ratio = q;
          leave = r;
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
    throw std::runtime_error("simplex_lp: iteration limit");
  };

  LpResult res;
  Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(cols);
  phase1.tail(m).setOnes();
  run(phase1, cols);
  double infeasibility = 0.0;
  for (Eigen::Index r = 0; r < m; ++r)
    if (basis[static_cast<std::size_t>(r)] >= n + m) infeasibility += t(r, cols);
  if (infeasibility > 1e-9) {
    res.status = LpResult::Status::infeasible;
    return res;
  }
  // Drive remaining (zero-valued) artificials out of the basis.
  for (Eigen::Index r = 0; r < m; ++r) {
    if (basis[static_cast<std::size_t>(r)] < n + m) continue;
    for (Eigen::Index j = 0; j < n + m; ++j)
      if (std::abs(t(r, j)) > 1e-9) {
        pivot(r, j);
        break;
      }
  }
  Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(cols);
  phase2.head(n) = c;
  if (!run(phase2, n + m)) {
    res.status = LpResult::Status::unbounded;
    return res;
  }
  res.x = Eigen::VectorXd::Zero(n);
  for (Eigen::Index r = 0; r < m; ++r)
    if (basis[static_cast<std::size_t>(r)] < n) res.x[basis[static_cast<std::size_t>(r)]] = t(r, cols);
  res.value = c.dot(res.x);
  return res;
}

double linear_bound_lp(const Eigen::VectorXd& u, const OutcomeVector& y, double bound) {
  const auto n = u.size();
  // sum |Y_i - theta_i| = sum Y_i + sum (1 - 2 Y_i) theta_i on the box.
  Eigen::VectorXd c(n);
  double offset = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    c[i] = 1.0 - 2.0 * y[static_cast<std::size_t>(i)];
    offset += y[static_cast<std::size_t>(i)];
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + 2, n);
  Eigen::VectorXd b(n + 2);
  a.row(0) = u.transpose();
  b[0] = bound;
  a.row(1) = -u.transpose();
  b[1] = bound;
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i + 2, i) = 1.0;
    b[i + 2] = 1.0;
  }
  const LpResult r = simplex_lp(c, a, b);
  if (r.status != LpResult::Status::optimal) throw std::runtime_error("linear_bound_lp: LP not solved");
  return offset + r.value;
}

}  // namespace prevalence
