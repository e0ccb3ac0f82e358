#include "prevalence/sim.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "prevalence/hypothesis.hpp"
#include "prevalence/parallel.hpp"
#include "prevalence/rng.hpp"

namespace prevalence {

AdjacencyGraph ring_graph(int n, int d_max) {
  const int half = d_max / 2;
  if (n < 2 * half + 1 || half < 1) throw std::invalid_argument("ring_graph: need n > d_max >= 2");
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i)
    for (int k = 1; k <= half; ++k) edges.emplace_back(i, (i + k) % n);
  return build_undirected_graph(edges, n);
}

AdjacencyGraph random_bounded_degree_graph(int n, int d_max, double mean_degree, std::uint64_t seed) {
  if (n < 2 || d_max < 1) throw std::invalid_argument("random_bounded_degree_graph: need n >= 2, d_max >= 1");
  Rng rng(seed);
  std::uniform_int_distribution<int> pick(0, n - 1);
  const long target = std::lround(std::min(mean_degree, static_cast<double>(d_max)) * n / 2.0);
  std::vector<int> degree(static_cast<std::size_t>(n), 0);
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  std::vector<Edge> edges;
  for (long attempt = 0; attempt < 50 * target + 100 && static_cast<long>(edges.size()) < target; ++attempt) {
    const int a = pick(rng);
    const int b = pick(rng);
    if (a == b || degree[static_cast<std::size_t>(a)] >= d_max || degree[static_cast<std::size_t>(b)] >= d_max)
      continue;
    auto& na = adj[static_cast<std::size_t>(a)];
    if (std::find(na.begin(), na.end(), b) != na.end()) continue;
    na.push_back(b);
    adj[static_cast<std::size_t>(b)].push_back(a);
    ++degree[static_cast<std::size_t>(a)];
    ++degree[static_cast<std::size_t>(b)];
    edges.emplace_back(a, b);
  }
  return build_undirected_graph(edges, n);
}

ClusterGeometry cluster_line(int n_clusters, int cluster_size, int radius) {
  if (n_clusters < 2 || cluster_size < 1 || radius < 1) throw std::invalid_argument("cluster_line: invalid geometry");
  ClusterGeometry out;
  const int n = n_clusters * cluster_size;
  out.cluster_of.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.cluster_of[static_cast<std::size_t>(i)] = i / cluster_size;
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    const int c = i / cluster_size;
    for (int other = std::max(0, c - radius); other <= std::min(n_clusters - 1, c + radius); ++other) {
      if (other == c) continue;
      for (int k = 0; k < cluster_size; ++k) edges.emplace_back(i, other * cluster_size + k);
    }
  }
  out.graph = build_graph(edges, n);
  return out;
}

AdjacencyGraph permute_graph(const AdjacencyGraph& g, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0) throw std::invalid_argument("permute_graph: fraction outside [0, 1]");
  const int n = g.size();
  Rng rng(seed);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto k = static_cast<std::size_t>(std::lround(fraction * n));
  std::vector<int> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<int> image = chosen;
  std::shuffle(image.begin(), image.end(), rng);
  std::vector<int> relabel(static_cast<std::size_t>(n));
  std::iota(relabel.begin(), relabel.end(), 0);
  for (std::size_t t = 0; t < k; ++t) relabel[static_cast<std::size_t>(chosen[t])] = image[t];
  std::vector<Edge> edges;
  for (const auto& [a, b] : g.edges())
    edges.emplace_back(relabel[static_cast<std::size_t>(a)], relabel[static_cast<std::size_t>(b)]);
  return build_graph(edges, n);
}

ExposureSpec make_exposure(const ModelConfig& m, int n) {
  if (m.exposure == "count") return ExposureSpec::count(n, static_cast<int>(std::lround(m.threshold)));
  if (m.exposure == "fraction") return ExposureSpec::fraction(n, m.threshold);
  throw std::invalid_argument("unknown exposure mode: " + m.exposure);
}

ThresholdResponse draw_threshold_model(const ModelConfig& m, const AdjacencyGraph& true_graph, std::uint64_t seed) {
  const int n = true_graph.size();
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  ThresholdResponse t;
  t.true_graph = true_graph;
  t.true_exposure = make_exposure(m, n);
  for (int i = 0; i < n; ++i) {
    t.baseline.push_back(draw(m.baseline_lo, m.baseline_hi));
    t.direct.push_back(draw(m.direct_lo, m.direct_hi));
    const double s = draw(m.spillover_lo, m.spillover_hi);
    t.spillover.push_back(unit(rng) < m.spillover_share ? s : 0.0);
  }
  return t;
}

void validate_sim_config(const SimConfig& cfg) {
  if (cfg.replications < 1) throw std::invalid_argument("replications must be at least 1");
  if (cfg.seeds < 1) throw std::invalid_argument("seeds must be at least 1");
  if (cfg.n_grid.empty()) throw std::invalid_argument("n_grid is empty");
  if (!std::is_sorted(cfg.n_grid.begin(), cfg.n_grid.end()) ||
      std::adjacent_find(cfg.n_grid.begin(), cfg.n_grid.end()) != cfg.n_grid.end())
    throw std::invalid_argument("n_grid must be strictly ascending");
  if (!(cfg.treated_fraction > 0.0 && cfg.treated_fraction < 1.0))
    throw std::invalid_argument("treated_fraction must lie in (0, 1)");
  for (double a : cfg.alphas)
    if (!(a > 0.0 && a < 0.5)) throw std::invalid_argument("alpha must lie in (0, 0.5)");
  if (cfg.experiment != "coverage" && cfg.experiment != "normality" && cfg.experiment != "consistency")
    throw std::invalid_argument("unknown experiment: " + cfg.experiment);
  if (cfg.graph != "ring" && cfg.graph != "random" && cfg.graph != "cluster")
    throw std::invalid_argument("unknown graph generator: " + cfg.graph);
}

namespace {

struct Instance {
  Design design;
  AdjacencyGraph analysis_graph;
  ExposureSpec spec;
  PotentialOutcomeModel model;
  Level level = Level::unit;
};

Instance make_instance(const SimConfig& cfg, int n) {
  AdjacencyGraph truth;
  std::vector<int> cluster_of;
  if (cfg.graph == "ring") {
    truth = ring_graph(n, cfg.d_max);
  } else if (cfg.graph == "random") {
    truth = random_bounded_degree_graph(n, cfg.d_max, cfg.mean_degree, derive_seed(cfg.seed, 20, n));
  } else {
    if (n % cfg.cluster_size != 0) throw std::invalid_argument("N must be a multiple of cluster_size");
    ClusterGeometry geo = cluster_line(n / cfg.cluster_size, cfg.cluster_size, cfg.cluster_radius);
    truth = std::move(geo.graph);
    cluster_of = std::move(geo.cluster_of);
  }

  auto treated = [&](int blocks) {
    return std::clamp(static_cast<int>(std::lround(cfg.treated_fraction * blocks)), 1, blocks - 1);
  };
  Design design = cluster_of.empty()
                      ? Design::complete(n, treated(n))
                      : Design(ClusterRandomization{cluster_of, std::vector<int>(static_cast<std::size_t>(n / cfg.cluster_size), 0),
                                                    {treated(n / cfg.cluster_size)}});

  AdjacencyGraph analysis = truth;
  if (cfg.misspecify_fraction > 0.0) {
    analysis = permute_graph(truth, cfg.misspecify_fraction, derive_seed(cfg.seed, 22, n));
    if (!cluster_of.empty()) {
      std::vector<Edge> kept;
      for (const auto& [a, b] : analysis.edges())
        if (cluster_of[static_cast<std::size_t>(a)] != cluster_of[static_cast<std::size_t>(b)]) kept.emplace_back(a, b);
      analysis = build_graph(kept, n);
    }
  }
  Instance inst{std::move(design), std::move(analysis), make_exposure(cfg.model, n),
                draw_threshold_model(cfg.model, truth, derive_seed(cfg.seed, 21, n)),
                cluster_of.empty() ? Level::unit : Level::cluster};
  return inst;
}

EngineConfig engine_for(const SimConfig& cfg) {
  EngineConfig e = cfg.analysis.engine;
  e.threads = cfg.threads;
  return e;
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

}  // namespace

double ks_standard_normal(std::vector<double> sample) {
  if (sample.empty()) throw std::invalid_argument("ks_standard_normal: empty sample");
  std::sort(sample.begin(), sample.end());
  const boost::math::normal_distribution<double> normal;
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = boost::math::cdf(normal, sample[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

CoverageReport run_coverage(const SimConfig& cfg) {
  validate_sim_config(cfg);
  CoverageReport report;
  for (int n : cfg.n_grid) {
    const Instance inst = make_instance(cfg, n);
    const EngineConfig engine = engine_for(cfg);
    const PropensityTable table = build_propensity_table(inst.design, inst.analysis_graph, inst.spec, engine);
    const UDefinition def{cfg.analysis.variant, &table};
    const QMoments moments = build_Q_moments(inst.design, inst.analysis_graph, inst.spec, def, engine);
    AnalysisConfig acfg = cfg.analysis;
    acfg.alphas = cfg.alphas;

    struct Rep {
      int psi = 0;
      double point = 0.0;
      long mc_entries = 0;
      std::vector<double> bound;
      std::vector<std::uint8_t> backup;
    };
    std::vector<Rep> reps(static_cast<std::size_t>(cfg.replications));
    parallel_for(reps.size(), cfg.threads, [&](std::size_t r) {
      const Assignment x = sample_assignment(inst.design, derive_seed(cfg.seed, 30, n, r));
      const OutcomeVector y = realize_outcomes(inst.model, x);
      Rep& rep = reps[r];
      rep.psi = true_psi(inst.model, x, inst.level, &inst.design);
      const Analysis a = analyze(inst.design, inst.analysis_graph, inst.spec, table, x, y, acfg, &moments);
      rep.point = a.point.units;
      rep.mc_entries = a.q.mc_entries;
      for (const auto& iv : a.intervals) {
        rep.bound.push_back(iv.lower_bound_units);
        rep.backup.push_back(iv.active_program == "backup" ? 1 : 0);
      }
    });

    for (std::size_t k = 0; k < cfg.alphas.size(); ++k) {
      CoverageCell cell;
      cell.n = n;
      cell.alpha = cfg.alphas[k];
      cell.confidence_level = 1.0 - 2.0 * cell.alpha;
      cell.replications = cfg.replications;
      cell.excluded_units = table.excluded_count();
      double sum_sq = 0.0;
      for (const Rep& rep : reps) {
        const bool covered = rep.bound[k] <= rep.psi + cfg.analysis.solver.objective_tol;
        if (!covered) ++cell.misses;
        cell.mean_bound += rep.bound[k];
        sum_sq += rep.bound[k] * rep.bound[k];
        cell.mean_point_estimate += rep.point;
        cell.mean_psi += rep.psi;
        cell.backup_share += rep.backup[k];
        cell.mc_entries = std::max(cell.mc_entries, rep.mc_entries);
      }
      const double r = cfg.replications;
      cell.coverage = 1.0 - cell.misses / r;
      cell.coverage_se = std::sqrt(cell.coverage * (1.0 - cell.coverage) / r);
      cell.mean_bound /= r;
      cell.mean_bound_se = r > 1 ? std::sqrt(std::max(0.0, (sum_sq / r - cell.mean_bound * cell.mean_bound) / (r - 1))) : 0.0;
      cell.mean_point_estimate /= r;
      cell.mean_psi /= r;
      cell.backup_share /= r;
      report.cells.push_back(cell);
    }
  }
  return report;
}

NormalityReport run_normality(const SimConfig& cfg) {
  validate_sim_config(cfg);
  NormalityReport report;
  for (int n : cfg.n_grid) {
    const Instance inst = make_instance(cfg, n);
    const PropensityTable table = build_propensity_table(inst.design, inst.analysis_graph, inst.spec, engine_for(cfg));
    const UDefinition def{cfg.analysis.variant, &table};

    auto tau_at = [&](const Assignment& x) {
      const ExposureVector w = compute_exposure(inst.analysis_graph, inst.spec, x);
      const OutcomeVector theta = true_theta_star(inst.model, x, inst.level, &inst.design);
      double t = 0.0;
      for (int i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (theta[k]) t += def.weight(i, x[k], w[k]);
      }
      return t;
    };

    NormalityCell cell;
    cell.n = n;
    cell.replications = cfg.replications;
    cell.variance_floor = std::pow(static_cast<double>(n), 0.6);
    if (support_size(inst.design) <= cfg.enumeration_cap) {
      cell.variance_method = "exact";
      cell.var_tau = exact_var_tau(inst.design, inst.analysis_graph, inst.spec, def, inst.model, inst.level,
                                   cfg.enumeration_cap);
    } else {
      cell.variance_method = "monte-carlo";
      std::vector<double> draws(static_cast<std::size_t>(cfg.variance_multiplier) *
                                static_cast<std::size_t>(cfg.replications));
      parallel_for(draws.size(), cfg.threads, [&](std::size_t r) {
        draws[r] = tau_at(sample_assignment(inst.design, derive_seed(cfg.seed, 40, n, r)));
      });
      const double mean = std::accumulate(draws.begin(), draws.end(), 0.0) / static_cast<double>(draws.size());
      double ss = 0.0;
      for (double t : draws) ss += (t - mean) * (t - mean);
      cell.var_tau = ss / static_cast<double>(draws.size() - 1);
    }
    cell.degenerate = cell.var_tau < cell.variance_floor;

    double total = 0.0;
    for (int s = 0; s < cfg.seeds; ++s) {
      std::vector<double> taus(static_cast<std::size_t>(cfg.replications));
      const std::uint64_t base = derive_seed(cfg.seed, 41, n, s);
      parallel_for(taus.size(), cfg.threads, [&](std::size_t r) {
        taus[r] = tau_at(sample_assignment(inst.design, derive_seed(base, r)));
      });
      total += std::accumulate(taus.begin(), taus.end(), 0.0);
      if (cell.var_tau > 0.0) {
        // E tau = 0 because theta*_i depends on X_i only and E[u_i | X_i] = 0.
        const double sd = std::sqrt(cell.var_tau);
        for (double& t : taus) t /= sd;
        cell.ks_per_seed.push_back(ks_standard_normal(taus));
      }
    }
    cell.mean_tau = total / (static_cast<double>(cfg.replications) * cfg.seeds);
    cell.ks = cell.ks_per_seed.empty() ? std::numeric_limits<double>::quiet_NaN() : median(cell.ks_per_seed);
    report.cells.push_back(cell);
  }
  return report;
}

ConsistencyReport run_consistency(const SimConfig& cfg) {
  validate_sim_config(cfg);
  ConsistencyReport report;
  for (int n : cfg.n_grid) {
    const Instance inst = make_instance(cfg, n);
    const PropensityTable table = build_propensity_table(inst.design, inst.analysis_graph, inst.spec, engine_for(cfg));
    std::vector<double> err(static_cast<std::size_t>(cfg.replications));
    std::vector<double> psi_fraction(err.size());
    parallel_for(err.size(), cfg.threads, [&](std::size_t r) {
      const Assignment x = sample_assignment(inst.design, derive_seed(cfg.seed, 50, n, r));
      const OutcomeVector y = realize_outcomes(inst.model, x);
      const OutcomeVector theta = true_theta_star(inst.model, x, inst.level, &inst.design);
      const UVector u = build_u(cfg.analysis.variant, x, compute_exposure(inst.analysis_graph, inst.spec, x), table);
      const double lhat = point_estimate(u, y).units;
      err[r] = std::abs(lhat - holder_bound(u, y, theta)) / n;
      psi_fraction[r] = static_cast<double>(psi(y, theta)) / n;
    });
    ConsistencyCell cell;
    cell.n = n;
    cell.replications = cfg.replications;
    cell.median = median(err);
    cell.q10 = quantile(err, 0.1);
    cell.q90 = quantile(err, 0.9);
    cell.mean_psi_fraction = std::accumulate(psi_fraction.begin(), psi_fraction.end(), 0.0) / cfg.replications;
    report.cells.push_back(cell);
  }
  const double last = report.cells.back().median;
  report.ratio = last > 0.0 ? report.cells.front().median / last : std::numeric_limits<double>::infinity();
  return report;
}

}  // namespace prevalence
