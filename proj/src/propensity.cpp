#include "prevalence/propensity.hpp"

#include <algorithm>
#include <boost/container_hash/hash.hpp>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "prevalence/parallel.hpp"
#include "prevalence/rng.hpp"

namespace prevalence {

std::string to_string(Method m) {
  switch (m) {
    case Method::exact: return "exact";
    case Method::monte_carlo: return "monte-carlo";
    case Method::excluded: return "excluded";
  }
  return "unknown";
}

int PropensityTable::excluded_count() const {
  return static_cast<int>(std::count_if(units.begin(), units.end(), [](const auto& u) { return u.excluded; }));
}

double UDefinition::weight(int i, std::uint8_t x, std::uint8_t w) const {
  if (table->excluded(i)) return 0.0;
  return unit_weight(variant, table->p1(i, x), w);
}

namespace {

constexpr int kNever = -1;

// Probability that, out of m specific free blocks in a stratum where t of
// the n free blocks get treated, exactly one particular a-subset is treated:
//   P^t_a * P^(n-t)_(m-a) / P^n_m.
double subset_weight(int n, int t, int m, int a) {
  if (a < 0 || a > m || a > t || m - a > n - t) return 0.0;
  double w = 1.0;
  for (int k = 0; k < m; ++k) {
    const int num = k < a ? t - k : n - t - (k - a);
    w *= static_cast<double>(num) / (n - k);
  }
  return w;
}

// Canonical encoding of the exposure law for one or two target units:
//   [need_i, need_j, n_groups, {n, t, m, (c_i, c_j) x m} x n_groups]
// need = 0 means the target is exposed regardless, kNever that it never is.
// Contributions are clamped at need because counts saturate there.
using ProblemKey = std::vector<int>;

struct KeyHash {
  std::size_t operator()(const ProblemKey& k) const { return boost::hash_range(k.begin(), k.end()); }
};

struct Target {
  int unit = -1;
  int need = 0;
};

std::optional<ProblemKey> make_key(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec,
                                   const ConditionedPool& pool, int i, int j, int cap) {
  // (block, c_i, c_j) for free neighbor blocks
  std::vector<std::array<int, 3>> free;
  std::array<int, 2> offset{0, 0};
  auto collect = [&](int unit, int slot) {
    for (int k : g.out_neighbors(unit)) {
      const int b = d.block_of(k);
      const int fixed = pool.fixed_value(b);
      if (fixed >= 0) {
        offset[static_cast<std::size_t>(slot)] += fixed;
        continue;
      }
      auto it = std::find_if(free.begin(), free.end(), [&](const auto& e) { return e[0] == b; });
      if (it == free.end()) {
        free.push_back({b, 0, 0});
        it = free.end() - 1;
      }
      ++(*it)[static_cast<std::size_t>(slot) + 1];
    }
  };
  collect(i, 0);
  if (j >= 0) collect(j, 1);
  if (static_cast<int>(free.size()) > cap) return std::nullopt;

  std::array<int, 2> need{0, 0};
  std::array<int, 2> total{0, 0};
  for (const auto& e : free) {
    total[0] += e[1];
    total[1] += e[2];
  }
  const int targets[2] = {i, j};
  for (int s = 0; s < 2; ++s) {
    if (targets[s] < 0) continue;
    const int r = exposure_min_count(g, spec, targets[s]) - offset[static_cast<std::size_t>(s)];
    if (r <= 0)
      need[static_cast<std::size_t>(s)] = 0;
    else if (r > total[static_cast<std::size_t>(s)])
      need[static_cast<std::size_t>(s)] = kNever;
    else
      need[static_cast<std::size_t>(s)] = r;
  }
  for (auto& e : free)
    for (int s = 0; s < 2; ++s) {
      const int r = need[static_cast<std::size_t>(s)];
      e[static_cast<std::size_t>(s) + 1] = r <= 0 ? 0 : std::min(e[static_cast<std::size_t>(s) + 1], r);
    }
  std::erase_if(free, [](const auto& e) { return e[1] == 0 && e[2] == 0; });

  // group by stratum, then sort for a canonical form
  std::vector<std::vector<int>> groups;
  std::vector<int> group_stratum;
  for (const auto& e : free) {
    const int s = d.stratum_of_block(e[0]);
    auto it = std::find(group_stratum.begin(), group_stratum.end(), s);
    std::size_t gi;
    if (it == group_stratum.end()) {
      group_stratum.push_back(s);
      groups.push_back({pool.remaining_blocks[static_cast<std::size_t>(s)],
                        pool.remaining_treated[static_cast<std::size_t>(s)], 0});
      gi = groups.size() - 1;
    } else {
      gi = static_cast<std::size_t>(it - group_stratum.begin());
    }
    groups[gi].push_back(e[1] * 65536 + e[2]);
    ++groups[gi][2];
  }
  for (auto& grp : groups) std::sort(grp.begin() + 3, grp.end());
  std::sort(groups.begin(), groups.end());

  ProblemKey key{need[0], need[1], static_cast<int>(groups.size())};
  for (const auto& grp : groups) {
    key.insert(key.end(), grp.begin(), grp.begin() + 3);
    for (auto it = grp.begin() + 3; it != grp.end(); ++it) {
      key.push_back(*it / 65536);
      key.push_back(*it % 65536);
    }
  }
  return key;
}

// Saturating count distribution over the free blocks, one stratum group at
// a time, combined across groups (strata are sampled independently).
JointExposure solve_key(const ProblemKey& key) {
  const int need_i = key[0];
  const int need_j = key[1];
  const int dim_i = need_i > 0 ? need_i + 1 : 1;
  const int dim_j = need_j > 0 ? need_j + 1 : 1;
  const auto cells = static_cast<std::size_t>(dim_i * dim_j);

  std::vector<double> total(cells, 0.0);
  total[0] = 1.0;
  std::vector<double> counts;
  std::vector<double> group_dist(cells);
  std::vector<double> next(cells);

  std::size_t pos = 3;
  for (int gidx = 0; gidx < key[2]; ++gidx) {
    const int n = key[pos];
    const int t = key[pos + 1];
    const int m = key[pos + 2];
    pos += 3;
    // counts[a][si][sj]: number of a-subsets reaching saturated counts (si, sj)
    counts.assign(static_cast<std::size_t>(m + 1) * cells, 0.0);
    counts[0] = 1.0;
    for (int b = 0; b < m; ++b) {
      const int ci = key[pos + 2 * static_cast<std::size_t>(b)];
      const int cj = key[pos + 2 * static_cast<std::size_t>(b) + 1];
      for (int a = b; a >= 0; --a) {
        for (int si = dim_i - 1; si >= 0; --si) {
          for (int sj = dim_j - 1; sj >= 0; --sj) {
            const double c = counts[static_cast<std::size_t>(a) * cells + static_cast<std::size_t>(si * dim_j + sj)];
            if (c == 0.0) continue;
            const int ti = std::min(si + ci, dim_i - 1);
            const int tj = std::min(sj + cj, dim_j - 1);
            counts[static_cast<std::size_t>(a + 1) * cells + static_cast<std::size_t>(ti * dim_j + tj)] += c;
          }
        }
      }
    }
    pos += 2 * static_cast<std::size_t>(m);

    std::fill(group_dist.begin(), group_dist.end(), 0.0);
    for (int a = 0; a <= m; ++a) {
      const double w = subset_weight(n, t, m, a);
      if (w == 0.0) continue;
      for (std::size_t c = 0; c < cells; ++c) group_dist[c] += w * counts[static_cast<std::size_t>(a) * cells + c];
    }

    std::fill(next.begin(), next.end(), 0.0);
    for (int ai = 0; ai < dim_i; ++ai)
      for (int aj = 0; aj < dim_j; ++aj) {
        const double p = total[static_cast<std::size_t>(ai * dim_j + aj)];
        if (p == 0.0) continue;
        for (int bi = 0; bi < dim_i; ++bi)
          for (int bj = 0; bj < dim_j; ++bj) {
            const double q = group_dist[static_cast<std::size_t>(bi * dim_j + bj)];
            if (q == 0.0) continue;
            const int ti = std::min(ai + bi, dim_i - 1);
            const int tj = std::min(aj + bj, dim_j - 1);
            next[static_cast<std::size_t>(ti * dim_j + tj)] += p * q;
          }
      }
    total.swap(next);
  }

  JointExposure out{};
  for (int si = 0; si < dim_i; ++si)
    for (int sj = 0; sj < dim_j; ++sj) {
      const int wi = need_i == kNever ? 0 : (si == dim_i - 1 ? 1 : 0);
      const int wj = need_j == kNever ? 0 : (sj == dim_j - 1 ? 1 : 0);
      out[static_cast<std::size_t>(wi)][static_cast<std::size_t>(wj)] += total[static_cast<std::size_t>(si * dim_j + sj)];
    }
  return out;
}

class ExposureCache {
 public:
  const JointExposure& get(const ProblemKey& key) {
    auto it = map_.find(key);
    if (it != map_.end()) return it->second;
    return map_.emplace(key, solve_key(key)).first->second;
  }

 private:
  std::unordered_map<ProblemKey, JointExposure, KeyHash> map_;
};

std::optional<JointExposure> joint_exposure_impl(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec,
                                                 int i, int j, std::uint8_t x_i, std::uint8_t x_j, int cap,
                                                 ExposureCache* cache) {
  const Condition conds[2] = {{i, x_i}, {j, x_j}};
  const ConditionedPool pool = condition_design(d, std::span<const Condition>(conds, i == j ? 1 : 2));
  if (i == j && x_i != x_j) throw InfeasibleCondition("unit conditioned on two treatments");
  auto key = make_key(d, g, spec, pool, i, i == j ? -1 : j, cap);
  if (!key) return std::nullopt;
  JointExposure p = cache ? cache->get(*key) : solve_key(*key);
  if (i == j) {
    // second target is absent (always exposed); fold onto the diagonal
    JointExposure diag{};
    diag[0][0] = p[0][0] + p[0][1];
    diag[1][1] = p[1][0] + p[1][1];
    return diag;
  }
  return p;
}

double moment_from_joint(const JointExposure& p, const UDefinition& u, int i, int j, std::uint8_t x_i,
                         std::uint8_t x_j) {
  double m = 0.0;
  for (std::uint8_t a = 0; a < 2; ++a)
    for (std::uint8_t b = 0; b < 2; ++b) {
      if (p[a][b] == 0.0) continue;
      m += p[a][b] * u.weight(i, x_i, a) * u.weight(j, x_j, b);
    }
  return m;
}

int treated_neighbors(const AdjacencyGraph& g, const Assignment& x, int i) {
  int c = 0;
  for (int k : g.out_neighbors(i)) c += x[static_cast<std::size_t>(k)];
  return c;
}

}  // namespace

std::optional<JointExposure> exact_joint_exposure(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec,
                                                  int i, int j, std::uint8_t x_i, std::uint8_t x_j, int cap) {
  return joint_exposure_impl(d, g, spec, i, j, x_i, x_j, cap, nullptr);
}

std::optional<double> exact_propensity(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec, int i,
                                       std::uint8_t x, int cap) {
  auto p = joint_exposure_impl(d, g, spec, i, i, x, x, cap, nullptr);
  if (!p) return std::nullopt;
  return (*p)[1][1];
}

McEstimate mc_propensity(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec, int i, std::uint8_t x,
                         int replications, std::uint64_t seed) {
  if (replications < 1) throw std::invalid_argument("mc_propensity: replications must be positive");
  const Condition cond[1] = {{i, x}};
  Rng rng(seed);
  long hits = 0;
  for (int r = 0; r < replications; ++r) {
    const Assignment draw = sample_conditional(d, cond, rng);
    hits += exposure_from_count(g, spec, i, treated_neighbors(g, draw, i));
  }
  McEstimate est;
  est.replications = replications;
  est.value = static_cast<double>(hits) / replications;
  est.std_error = std::sqrt(est.value * (1.0 - est.value) / replications);
  return est;
}

PropensityTable build_propensity_table(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec,
                                       const EngineConfig& cfg) {
  validate_exposure(g, spec);
  if (g.size() != d.n_units()) throw std::invalid_argument("propensity: graph and design sizes differ");
  PropensityTable table;
  table.positivity_floor = cfg.positivity_floor;
  table.units.resize(static_cast<std::size_t>(g.size()));
  parallel_for(table.units.size(), cfg.threads, [&](std::size_t idx) {
    const int i = static_cast<int>(idx);
    UnitPropensity& e = table.units[idx];
    if (g.out_degree(i) == 0) {
      e.p1 = {static_cast<double>(spec.w_empty), static_cast<double>(spec.w_empty)};
      e.method = Method::excluded;
      e.excluded = true;
      return;
    }
    for (std::uint8_t x = 0; x < 2; ++x) {
      if (auto p = exact_propensity(d, g, spec, i, x, cfg.exact_cap)) {
        e.p1[x] = *p;
      } else {
        const McEstimate mc =
            mc_propensity(d, g, spec, i, x, cfg.mc_replications, derive_seed(cfg.seed, 1, idx, x));
        e.p1[x] = mc.value;
        e.std_error[x] = mc.std_error;
        e.method = Method::monte_carlo;
        e.replications = mc.replications;
      }
    }
    for (std::uint8_t x = 0; x < 2; ++x) {
      // summed hypergeometric weights can miss an exact 0 or 1 by rounding
      if (e.method == Method::exact && e.p1[x] < 1e-12) e.p1[x] = 0.0;
      if (e.method == Method::exact && e.p1[x] > 1.0 - 1e-12) e.p1[x] = 1.0;
    }
    for (std::uint8_t x = 0; x < 2; ++x)
      if (e.p1[x] <= 0.0 || e.p1[x] >= 1.0 || e.p1[x] < cfg.positivity_floor || e.p1[x] > 1.0 - cfg.positivity_floor)
        e.excluded = true;
  });
  return table;
}

std::optional<double> exact_pair_moment(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec,
                                        const UDefinition& u, int i, int j, std::uint8_t x_i, std::uint8_t x_j,
                                        int cap) {
  if (u.table->excluded(i) || u.table->excluded(j)) {
    condition_design(d, std::array<Condition, 2>{Condition{i, x_i}, Condition{j, x_j}});
    return 0.0;
  }
  auto p = joint_exposure_impl(d, g, spec, i, j, x_i, x_j, cap, nullptr);
  if (!p) return std::nullopt;
  return moment_from_joint(*p, u, i, j, x_i, x_j);
}

McEstimate mc_pair_moment(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec, const UDefinition& u,
                          int i, int j, std::uint8_t x_i, std::uint8_t x_j, int replications, std::uint64_t seed) {
  if (replications < 1) throw std::invalid_argument("mc_pair_moment: replications must be positive");
  const Condition conds[2] = {{i, x_i}, {j, x_j}};
  Rng rng(seed);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int r = 0; r < replications; ++r) {
    const Assignment draw = sample_conditional(d, conds, rng);
    const double v = u.weight(i, x_i, exposure_from_count(g, spec, i, treated_neighbors(g, draw, i))) *
                     u.weight(j, x_j, exposure_from_count(g, spec, j, treated_neighbors(g, draw, j)));
    sum += v;
    sum_sq += v * v;
  }
  McEstimate est;
  est.replications = replications;
  est.value = sum / replications;
  const double var = replications > 1 ? (sum_sq - replications * est.value * est.value) / (replications - 1) : 0.0;
  est.std_error = std::sqrt(std::max(var, 0.0) / replications);
  return est;
}

namespace {

struct PairEntry {
  double value = 0.0;
  Method method = Method::exact;
  double std_error = 0.0;
};

double diagonal_moment(const UDefinition& u, int i, std::uint8_t xi) {
  const double p = u.table->p1(i, xi);
  const double u1 = u.weight(i, xi, 1);
  const double u0 = u.weight(i, xi, 0);
  return p * u1 * u1 + (1.0 - p) * u0 * u0;
}

PairEntry pair_entry(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec, const UDefinition& u, int i,
                     int j, std::uint8_t xi, std::uint8_t xj, const EngineConfig& cfg, ExposureCache* cache) {
  PairEntry e;
  if (auto p = joint_exposure_impl(d, g, spec, i, j, xi, xj, cfg.exact_cap, cache)) {
    e.value = moment_from_joint(*p, u, i, j, xi, xj);
    return e;
  }
  // common random numbers within each (x_i, x_j) cell
  const McEstimate mc =
      mc_pair_moment(d, g, spec, u, i, j, xi, xj, cfg.mc_replications, derive_seed(cfg.seed, 2, xi, xj));
  e.value = mc.value;
  e.std_error = mc.std_error;
  e.method = Method::monte_carlo;
  return e;
}

std::vector<int> active_units(const PropensityTable& t) {
  std::vector<int> active;
  for (int i = 0; i < t.size(); ++i)
    if (!t.excluded(i)) active.push_back(i);
  return active;
}

}  // namespace

QMatrix build_Q(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec, const UDefinition& u,
                const Assignment& x, const EngineConfig& cfg) {
  const int n = g.size();
  if (static_cast<int>(x.size()) != n || u.table->size() != n)
    throw std::invalid_argument("build_Q: dimension mismatch");
  QMatrix result;
  result.q = Eigen::MatrixXd::Zero(n, n);

  const std::vector<int> active = active_units(*u.table);
  const long n_active = static_cast<long>(active.size());
  result.zero_entries = static_cast<long>(n) * (n + 1) / 2 - n_active * (n_active + 1) / 2;

  const unsigned workers = std::max(1u, cfg.threads);
  std::vector<ExposureCache> caches(workers);
  std::vector<long> exact_count(workers, 0), mc_count(workers, 0);
  std::vector<double> max_se(workers, 0.0);

  parallel_for_workers(active.size(), workers, [&](unsigned w, std::size_t row) {
    const int i = active[row];
    const std::uint8_t xi = x[static_cast<std::size_t>(i)];
    result.q(i, i) = diagonal_moment(u, i, xi);
    if (u.table->units[static_cast<std::size_t>(i)].method == Method::monte_carlo)
      ++mc_count[w];
    else
      ++exact_count[w];
    for (std::size_t col = row + 1; col < active.size(); ++col) {
      const int j = active[col];
      const PairEntry e = pair_entry(d, g, spec, u, i, j, xi, x[static_cast<std::size_t>(j)], cfg, &caches[w]);
      if (e.method == Method::monte_carlo) {
        max_se[w] = std::max(max_se[w], e.std_error);
        ++mc_count[w];
      } else {
        ++exact_count[w];
      }
      result.q(i, j) = e.value;
      result.q(j, i) = e.value;
    }
  });
  for (unsigned w = 0; w < workers; ++w) {
    result.exact_entries += exact_count[w];
    result.mc_entries += mc_count[w];
    result.max_std_error = std::max(result.max_std_error, max_se[w]);
  }
  return result;
}

QMoments build_Q_moments(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec, const UDefinition& u,
                         const EngineConfig& cfg) {
  const int n = g.size();
  if (u.table->size() != n || d.n_units() != n) throw std::invalid_argument("build_Q_moments: dimension mismatch");
  QMoments m;
  m.table = u.table;
  for (auto& row : m.value)
    for (auto& cell : row) cell = Eigen::MatrixXd::Zero(n, n);
  for (auto& row : m.monte_carlo)
    for (auto& cell : row) cell.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0);
  for (auto& row : m.std_error)
    for (auto& cell : row) cell = Eigen::MatrixXd::Zero(n, n);

  const std::vector<int> active = active_units(*u.table);
  const unsigned workers = std::max(1u, cfg.threads);
  std::vector<ExposureCache> caches(workers);
  parallel_for_workers(active.size(), workers, [&](unsigned w, std::size_t row) {
    const int i = active[row];
    for (std::uint8_t xi = 0; xi < 2; ++xi) m.value[xi][xi](i, i) = diagonal_moment(u, i, xi);
    for (std::size_t col = row + 1; col < active.size(); ++col) {
      const int j = active[col];
      for (std::uint8_t xi = 0; xi < 2; ++xi)
        for (std::uint8_t xj = 0; xj < 2; ++xj) {
          PairEntry e;
          try {
            e = pair_entry(d, g, spec, u, i, j, xi, xj, cfg, &caches[w]);
          } catch (const InfeasibleCondition&) {
            continue;  // this cell can never be observed
          }
          m.value[xi][xj](i, j) = e.value;
          m.value[xj][xi](j, i) = e.value;
          m.std_error[xi][xj](i, j) = e.std_error;
          m.std_error[xj][xi](j, i) = e.std_error;
          const std::uint8_t flag = e.method == Method::monte_carlo ? 1 : 0;
          m.monte_carlo[xi][xj][static_cast<std::size_t>(i) * n + j] = flag;
          m.monte_carlo[xj][xi][static_cast<std::size_t>(j) * n + i] = flag;
        }
    }
  });
  return m;
}

QMatrix assemble_Q(const QMoments& m, const Assignment& x) {
  const auto n = static_cast<int>(x.size());
  if (m.table->size() != n) throw std::invalid_argument("assemble_Q: dimension mismatch");
  QMatrix result;
  result.q = Eigen::MatrixXd::Zero(n, n);
  const std::vector<int> active = active_units(*m.table);
  const long n_active = static_cast<long>(active.size());
  result.zero_entries = static_cast<long>(n) * (n + 1) / 2 - n_active * (n_active + 1) / 2;
  for (std::size_t a = 0; a < active.size(); ++a) {
    const int i = active[a];
    const std::uint8_t xi = x[static_cast<std::size_t>(i)];
    result.q(i, i) = m.value[xi][xi](i, i);
    if (m.table->units[static_cast<std::size_t>(i)].method == Method::monte_carlo)
      ++result.mc_entries;
    else
      ++result.exact_entries;
    for (std::size_t b = a + 1; b < active.size(); ++b) {
      const int j = active[b];
      const std::uint8_t xj = x[static_cast<std::size_t>(j)];
      const double v = m.value[xi][xj](i, j);
      result.q(i, j) = v;
      result.q(j, i) = v;
      if (m.monte_carlo[xi][xj][static_cast<std::size_t>(i) * n + j]) {
        ++result.mc_entries;
        result.max_std_error = std::max(result.max_std_error, m.std_error[xi][xj](i, j));
      } else {
        ++result.exact_entries;
      }
    }
  }
  return result;
}

}  // namespace prevalence
