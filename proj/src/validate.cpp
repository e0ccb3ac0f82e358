#include "prevalence/validate.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "prevalence/hypothesis.hpp"
#include "prevalence/interval.hpp"
#include "prevalence/oracle.hpp"
#include "prevalence/parallel.hpp"
#include "prevalence/sim.hpp"

namespace prevalence {

namespace {

struct Instance {
  Design design;
  AdjacencyGraph graph;
  ExposureSpec spec;
  ThresholdResponse model;
  Level level;
};

// Rotates through complete, stratified and cluster designs with N = 10.
Instance make_instance(std::uint64_t seed, int k) {
  constexpr int n = 10;
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ModelConfig mc;
  mc.baseline_hi = 0.9;
  mc.direct_hi = 0.6;
  mc.spillover_lo = 0.2;
  mc.spillover_hi = 0.8;
  mc.threshold = 1 + k % 2;
  switch (k % 3) {
    case 0: {
      AdjacencyGraph g = random_bounded_degree_graph(n, 3, 2.5, derive_seed(seed, 1));
      ExposureSpec spec = make_exposure(mc, n);
      ThresholdResponse m = draw_threshold_model(mc, g, derive_seed(seed, 2));
      return {Design::complete(n, 5), std::move(g), std::move(spec), std::move(m), Level::unit};
    }
    case 1: {
      AdjacencyGraph g = random_bounded_degree_graph(n, 3, 2.5, derive_seed(seed, 1));
      ExposureSpec spec = make_exposure(mc, n);
      ThresholdResponse m = draw_threshold_model(mc, g, derive_seed(seed, 2));
      StratifiedRandomization s{{0, 0, 0, 0, 0, 1, 1, 1, 1, 1}, {2, 3}};
      return {Design(s), std::move(g), std::move(spec), std::move(m), Level::unit};
    }
    default: {
      mc.exposure = "fraction";
      mc.threshold = 0.5;
      ClusterGeometry geo = cluster_line(5, 2, 1);
      ExposureSpec spec = make_exposure(mc, n);
      ThresholdResponse m = draw_threshold_model(mc, geo.graph, derive_seed(seed, 2));
      ClusterRandomization c{geo.cluster_of, {0, 0, 0, 0, 0}, {2}};
      return {Design(c), std::move(geo.graph), std::move(spec), std::move(m), Level::cluster};
    }
  }
}

void check(std::vector<ValidationCheck>& out, const std::string& name, std::uint64_t seed, double error,
           double tolerance, const std::string& detail = {}) {
  ValidationCheck c;
  c.name = name;
  c.instance_seed = seed;
  c.error = error;
  c.tolerance = tolerance;
  c.passed = error <= tolerance;
  c.detail = detail;
  out.push_back(c);
}

std::vector<ValidationCheck> validate_instance(const ValidationConfig& cfg, int k) {
  std::vector<ValidationCheck> out;
  const std::uint64_t seed = derive_seed(cfg.seed, 100, k);
  const Instance inst = make_instance(seed, k);
  const Design& d = inst.design;
  const AdjacencyGraph& g = inst.graph;
  const int n = d.n_units();

  EngineConfig engine;
  engine.positivity_floor = 0.0;
  engine.seed = seed;
  PropensityTable table = build_propensity_table(d, g, inst.spec, engine);
  for (auto& unit : table.units)
    if (!unit.excluded)
      for (double& p : unit.p1) p += cfg.perturb_propensity * (0.5 - p);

  // exact engine against enumeration and against Monte Carlo
  double enum_err = 0.0, mc_z = 0.0;
  std::string worst;
  for (int i = 0; i < n; ++i) {
    if (g.out_degree(i) == 0) continue;
    for (std::uint8_t x = 0; x < 2; ++x) {
      const double exact = table.p1(i, x);
      enum_err = std::max(enum_err, std::abs(exact - enumerate_propensity(d, g, inst.spec, i, x)));
      const McEstimate mc = mc_propensity(d, g, inst.spec, i, x, cfg.mc_replications, derive_seed(seed, 3, i, x));
      const double se = std::max(mc.std_error, 1.0 / cfg.mc_replications);
      const double z = std::abs(exact - mc.value) / se;
      if (z > mc_z) {
        mc_z = z;
        std::ostringstream s;
        s << "unit " << i << ", x=" << int(x) << ": exact " << exact << " vs MC " << mc.value << " (se " << se << ")";
        worst = s.str();
      }
    }
  }
  check(out, "propensity exact vs enumeration", seed, enum_err, 1e-10);
  check(out, "propensity exact vs MC mismatch (z-score)", seed, mc_z, 5.0, worst);

  const OutcomeVector theta_dummy(static_cast<std::size_t>(n), 0);
  for (Variant v : {Variant::ipw, Variant::alt}) {
    const UDefinition def{v, &table};
    const std::string tag = " [" + to_string(v) + "]";
    double mean_err = 0.0;
    for (int i = 0; i < n; ++i)
      for (std::uint8_t x = 0; x < 2; ++x)
        mean_err = std::max(mean_err, std::abs(enumerate_u_mean(d, g, inst.spec, def, i, x)));
    check(out, "E[u_i | X_i] = 0" + tag, seed, mean_err, 1e-10);

    const QMoments moments = build_Q_moments(d, g, inst.spec, def, engine);
    double q_err = 0.0, ev = 0.0;
    long count = 0;
    enumerate_assignments(d, 100000, [&](const Assignment& x) {
      const QMatrix q = assemble_Q(moments, x);
      if (count < 8) q_err = std::max(q_err, (q.q - enumerate_Q(d, g, inst.spec, def, x)).cwiseAbs().maxCoeff());
      const OutcomeVector theta = true_theta_star(inst.model, x, inst.level, &d);
      ev += variance_estimate(q, to_vector(theta));
      ++count;
    });
    check(out, "Q exact vs enumeration" + tag, seed, q_err, 1e-10);
    ev /= static_cast<double>(count);
    const double var = exact_var_tau(d, g, inst.spec, def, inst.model, inst.level);
    check(out, "E[V(theta*)] = Var tau" + tag, seed, std::abs(ev - var), 1e-8);
  }

  // interval programs against the integer optimum and a general LP
  const UDefinition def{Variant::ipw, &table};
  const Assignment x = sample_assignment(d, derive_seed(seed, 4));
  const OutcomeVector y = realize_outcomes(inst.model, x);
  const QMatrix q = build_Q(d, g, inst.spec, def, x, engine);
  const UVector u = build_u(Variant::ipw, x, compute_exposure(g, inst.spec, x), table);
  const SolverConfig solver;
  const DiagonalMajorizer dm = extract_majorizer(q.q, solver);
  check(out, "majorizer certificate", seed, dm.certificate.valid() ? 0.0 : 1.0, 0.0,
        "lambda_max " + std::to_string(dm.certificate.lambda_max));
  const double z = z_quantile(0.05);
  const double relax = solve_relaxation(u, q.q, dm, y, z, solver).value;
  const double integer = integer_optimum(u.u, q.q, y, z);
  check(out, "relaxation <= integer optimum", seed, std::max(0.0, relax - integer), 1e-6);
  const double greedy = solve_backup(u, y, n);
  const double lp = linear_bound_lp(u.u, y, std::cbrt(static_cast<double>(n)));
  check(out, "backup greedy vs LP", seed, std::abs(greedy - lp), 1e-9);
  return out;
}

}  // namespace

std::vector<ValidationCheck> run_validation(const ValidationConfig& cfg) {
  std::vector<std::vector<ValidationCheck>> per(static_cast<std::size_t>(cfg.instances));
  parallel_for(per.size(), cfg.threads, [&](std::size_t k) {
    try {
      per[k] = validate_instance(cfg, static_cast<int>(k));
    } catch (const std::exception& e) {
      check(per[k], "instance raised an error", derive_seed(cfg.seed, 100, k), 1.0, 0.0, e.what());
    }
  });
  std::vector<ValidationCheck> out;
  for (auto& v : per) out.insert(out.end(), v.begin(), v.end());
  return out;
}

}  // namespace prevalence
