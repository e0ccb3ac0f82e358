// One line per acceptance criterion; nonzero exit when any fails.

#include <sys/wait.h>

#include <Eigen/Eigenvalues>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "prevalence/cli.hpp"
#include "prevalence/hypothesis.hpp"
#include "prevalence/oracle.hpp"

namespace fs = std::filesystem;
using namespace prevalence;

namespace {

const std::string kCli = PREVALENCE_CLI;
const fs::path kData = TEST_DATA_DIR;
const fs::path kWork = fs::path(TEST_WORK_DIR) / "acceptance_work";

int failures = 0;

void report(int id, bool pass, const std::string& what, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("%s criterion %d (%s): %s\n", pass ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

EngineConfig no_floor() {
  EngineConfig e;
  e.positivity_floor = 0.0;
  return e;
}

// Small random instance: N units, complete design with N/2 treated, random
// graph with d_max 3, count or fraction threshold, and a threshold model.
struct SmallInstance {
  Design design;
  AdjacencyGraph graph;
  ExposureSpec spec;
  PotentialOutcomeModel model;
};

SmallInstance small_instance(int n, std::uint64_t seed) {
  Rng rng(seed);
  AdjacencyGraph g = random_bounded_degree_graph(n, 3, 1.5 + 1.5 * std::uniform_real_distribution<double>()(rng),
                                                 derive_seed(seed, 1));
  ExposureSpec spec = rng() % 3 == 0 ? ExposureSpec::fraction(n, 0.5) : ExposureSpec::count(n, 1 + int(rng() % 2));
  ModelConfig m;
  m.direct_hi = 0.4;
  m.spillover_lo = 0.2;
  m.spillover_hi = 0.9;
  PotentialOutcomeModel model = draw_threshold_model(m, g, derive_seed(seed, 2));
  return {Design::complete(n, n / 2), std::move(g), std::move(spec), std::move(model)};
}

void exactness() {
  const auto t0 = std::chrono::steady_clock::now();
  double p_err = 0.0, q_err = 0.0, mean_err = 0.0, v_err = 0.0;
  long q_entries = 0;
  for (std::uint64_t k = 0; k < 50; ++k) {
    const SmallInstance s = small_instance(10, derive_seed(100, k));
    const PropensityTable table = build_propensity_table(s.design, s.graph, s.spec, no_floor());
    for (int i = 0; i < 10; ++i)
      for (std::uint8_t x : {0, 1}) {
        const auto exact = exact_propensity(s.design, s.graph, s.spec, i, x);
        p_err = std::max(p_err, std::abs(*exact - enumerate_propensity(s.design, s.graph, s.spec, i, x)));
      }
    for (Variant v : {Variant::ipw, Variant::alt}) {
      const UDefinition u{v, &table};
      for (int i = 0; i < 10; ++i)
        for (std::uint8_t x : {0, 1})
          mean_err = std::max(mean_err, std::abs(enumerate_u_mean(s.design, s.graph, s.spec, u, i, x)));
      const QMoments moments = build_Q_moments(s.design, s.graph, s.spec, u, no_floor());
      for (std::uint64_t r = 0; r < 2; ++r) {
        const Assignment x = sample_assignment(s.design, derive_seed(k, 3, r));
        const Eigen::MatrixXd q = build_Q(s.design, s.graph, s.spec, u, x, no_floor()).q;
        q_err = std::max(q_err, (q - enumerate_Q(s.design, s.graph, s.spec, u, x)).cwiseAbs().maxCoeff());
        q_entries += q.size();
      }
      double mean_v = 0.0;
      int count = 0;
      enumerate_assignments(s.design, 1000, [&](const Assignment& x) {
        mean_v += variance_estimate(assemble_Q(moments, x), to_vector(true_theta_star(s.model, x, Level::unit)));
        ++count;
      });
      v_err = std::max(v_err, std::abs(mean_v / count - exact_var_tau(s.design, s.graph, s.spec, u, s.model, Level::unit)));
    }
  }
  const double t = seconds_since(t0);
  report(1, p_err <= 1e-10 && q_err <= 1e-10 && mean_err <= 1e-10 && t <= 120, "exact engine vs enumeration",
         fmt("50 instances, max |p error| %.2e, max |Q error| %.2e over %ld entries, max |E[u|X]| %.2e, %.1f s",
             p_err, q_err, q_entries, mean_err, t));
  report(2, v_err <= 1e-8, "E[V(theta*)] = Var tau", fmt("max |E V - Var tau| %.2e over 50 instances x 2 statistics", v_err));
}

void relaxation_and_majorizer() {
  const double alphas[] = {0.025, 0.05, 0.1, 0.25, 0.4};
  double worst_gap = -1e300, worst_lp = 0.0, worst_lambda = -1e300;
  int positive = 0, trace_violations = 0, uncertified = 0, instances = 0;
  SolverConfig solver;
  for (std::uint64_t k = 0; instances < 100; ++k) {
    const SmallInstance s = small_instance(12, derive_seed(200, k));
    const PropensityTable table = build_propensity_table(s.design, s.graph, s.spec, no_floor());
    if (table.excluded_count() == table.size()) continue;
    const Variant v = k % 2 ? Variant::alt : Variant::ipw;
    const Assignment x = sample_assignment(s.design, derive_seed(k, 4));
    const OutcomeVector y = realize_outcomes(s.model, x);
    const UVector u = build_u(v, x, compute_exposure(s.graph, s.spec, x), table);
    const QMatrix q = build_Q(s.design, s.graph, s.spec, {v, &table}, x, no_floor());
    const double z = z_quantile(alphas[instances % 5]);

    const DiagonalMajorizer g = gershgorin_majorizer(q.q, solver.psd_tol);
    const DiagonalMajorizer d = refine_majorizer(q.q, g, solver);
    for (const DiagonalMajorizer* m : {&g, &d}) {
      if (!m->certificate.valid()) ++uncertified;
      const double lam = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(q.q - Eigen::MatrixXd(m->d.asDiagonal()))
                             .eigenvalues()
                             .maxCoeff();
      worst_lambda = std::max(worst_lambda, lam);
    }
    if (d.trace() > g.trace() + 1e-12) ++trace_violations;

    const RelaxationResult r = solve_relaxation(u, q.q, d, y, z, solver);
    const double opt = integer_optimum(u.u, q.q, y, z);
    worst_gap = std::max(worst_gap, r.value - opt);
    if (r.value > 0) ++positive;
    const double bound = std::cbrt(12.0);
    worst_lp = std::max(worst_lp, std::abs(solve_backup(u, y, 12) - linear_bound_lp(u.u, y, bound)));
    ++instances;
  }
  report(3, worst_gap <= 1e-6 && worst_lp <= 1e-9, "relaxation soundness",
         fmt("100 instances (%d with a positive bound), max relaxation - integer optimum %.2e, max |greedy - LP| %.2e",
             positive, worst_gap, worst_lp));

  Eigen::MatrixXd two(2, 2);
  two << 1, 0.5, 0.5, 1;
  const double refined2 = refine_majorizer(two, gershgorin_majorizer(two), solver).trace();
  report(4, worst_lambda <= 1e-8 && uncertified == 0 && trace_violations == 0 && std::abs(refined2 - 3.0) <= 1e-6,
         "majorizer validity",
         fmt("200 majorizers, max lambda_max(Q - D) %.2e, %d uncertified, %d refinements above Gershgorin, 2x2 trace %.9f",
             worst_lambda, uncertified, trace_violations, refined2));
}

ModelConfig spillover_model() {
  ModelConfig m;
  m.baseline_lo = 0.0;
  m.baseline_hi = 1.0;
  m.direct_lo = 0.0;
  m.direct_hi = 0.3;
  m.spillover_lo = 0.3;
  m.spillover_hi = 0.8;
  m.exposure = "count";
  m.threshold = 2;
  return m;
}

void coverage() {
  const auto t0 = std::chrono::steady_clock::now();
  SimConfig cfg;
  cfg.graph = "ring";
  cfg.d_max = 4;
  cfg.n_grid = {400};
  cfg.replications = 500;
  cfg.alphas = {0.025};
  cfg.model = spillover_model();
  const CoverageCell well = run_coverage(cfg).cells.at(0);
  cfg.misspecify_fraction = 0.3;
  const CoverageCell mis = run_coverage(cfg).cells.at(0);
  const double t = seconds_since(t0);
  report(5, well.coverage >= 0.93 && mis.coverage >= 0.93 && mis.mean_bound < well.mean_bound && t <= 1800,
         "coverage at 95% one-sided",
         fmt("N=400, 500 reps: coverage %.3f (mean bound %.2f, mean psi %.2f); 30%% permuted graph: coverage %.3f "
             "(mean bound %.2f); %.0f s",
             well.coverage, well.mean_bound, well.mean_psi, mis.coverage, mis.mean_bound, t));
}

void normality() {
  SimConfig cfg;
  cfg.experiment = "normality";
  cfg.n_grid = {2000};
  cfg.replications = 2000;
  cfg.model = spillover_model();
  const NormalityCell single = run_normality(cfg).cells.at(0);

  // The trend needs a sampling error well below the KS gaps between grid points.
  cfg.n_grid = {250, 1000, 4000};
  cfg.replications = 20000;
  cfg.seeds = 5;
  const NormalityReport trend = run_normality(cfg);
  bool decreasing = true;
  std::string ks;
  for (std::size_t k = 0; k < trend.cells.size(); ++k) {
    ks += fmt("%s%d:%.4f", k ? ", " : "", trend.cells[k].n, trend.cells[k].ks);
    if (k > 0 && !(trend.cells[k].ks < trend.cells[k - 1].ks)) decreasing = false;
    if (trend.cells[k].degenerate) decreasing = false;
  }
  report(6, !single.degenerate && single.ks <= 0.05 && decreasing, "normality of tau",
         fmt("N=2000, 2000 reps: KS %.4f (%s variance); median KS over 5 seeds by N {%s}", single.ks,
             single.variance_method.c_str(), ks.c_str()));
}

void consistency() {
  SimConfig cfg;
  cfg.experiment = "consistency";
  cfg.n_grid = {250, 1000, 4000};
  cfg.replications = 500;
  cfg.model = spillover_model();
  cfg.analysis.variant = Variant::alt;
  cfg.analysis.engine.positivity_floor = 0.1;
  const ConsistencyReport r = run_consistency(cfg);
  bool decreasing = true;
  std::string med;
  for (std::size_t k = 0; k < r.cells.size(); ++k) {
    med += fmt("%s%d:%.5f", k ? ", " : "", r.cells[k].n, r.cells[k].median);
    if (k > 0 && !(r.cells[k].median < r.cells[k - 1].median)) decreasing = false;
  }
  report(7, decreasing && r.ratio >= 2.5 && r.ratio <= 6.0, "point-estimate scaling",
         fmt("median |L_hat - L|/N {%s}, ratio 250/4000 = %.3f", med.c_str(), r.ratio));
}

void holder() {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> z;
  int violations = 0, not_tight = 0;
  double worst = -1e300;
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 30);
    UVector u;
    u.u.resize(n);
    OutcomeVector y(n), theta(n);
    for (int i = 0; i < n; ++i) {
      u.u(i) = rng() % 5 == 0 ? 0.0 : z(rng);
      y[i] = rng() % 2;
      theta[i] = rng() % 2;
    }
    if (u.sup_norm() == 0.0) u.u(0) = 1.0;
    const double l = holder_bound(u, y, theta);
    const int p = psi(y, theta);
    worst = std::max(worst, l - p);
    if (l > p + 1e-9) ++violations;

    // Equal magnitudes with signs that predict Y - theta*.
    const double c = 0.1 + std::abs(z(rng));
    for (int i = 0; i < n; ++i) {
      const int diff = int(y[i]) - int(theta[i]);
      u.u(i) = diff > 0 ? c : diff < 0 ? -c : (rng() % 2 ? c : -c);
    }
    if (std::abs(holder_bound(u, y, theta) - p) > 1e-9) ++not_tight;
  }
  report(8, violations == 0 && not_tight == 0, "Holder bound and tightness",
         fmt("10000 triples: max L - psi %.2e, %d violations; %d non-tight cases under equal |u| and aligned signs",
             worst, violations, not_tight));
}

int run_cli(const std::string& args) {
  const std::string cmd = kCli + " " + args + " 2>>" + (kWork / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string schools_args() {
  return "--units " + (kData / "schools_units.csv").string() + " --edges " + (kData / "schools_edges.csv").string() +
         " --config " + (kData / "schools_config.json").string();
}

void fixture() {
  const fs::path out = kWork / "schools.json";
  if (run_cli("estimate " + schools_args() + " --out " + out.string()) != 0) {
    report(9, false, "school fixture", "estimate failed");
    return;
  }
  const auto j = nlohmann::json::parse(slurp(out));
  const int schools[] = {10, 10, 15, 14};
  const double means[] = {0.14, 0.22, 0.23, 0.53};
  bool ok = j["exposure_cells"].size() == 4;
  std::string got;
  for (std::size_t k = 0; ok && k < 4; ++k) {
    const auto& c = j["exposure_cells"][k];
    const double m = c["mean_outcome"].get<double>();
    got += fmt("%s(W=%d,X=%d) %d schools mean %.2f", k ? ", " : "", c["w"].get<int>(), c["x"].get<int>(),
               c["n_clusters"].get<int>(), m);
    ok = ok && c["n_clusters"].get<int>() == schools[k] && std::abs(m - means[k]) < 1e-12;
  }
  report(9, ok, "school fixture", got);
}

void determinism() {
  bool ok = true;
  std::string detail;
  for (const char* threads : {"1", "4"}) {
    ok = ok && run_cli("estimate " + schools_args() + " --seed 11 --threads " + threads + " --out " +
                       (kWork / (std::string("est_") + threads + ".json")).string()) == 0;
  }
  ok = ok && run_cli("estimate " + schools_args() + " --seed 11 --threads 4 --out " + (kWork / "est_4b.json").string()) == 0;
  const bool est_same = ok && slurp(kWork / "est_1.json") == slurp(kWork / "est_4.json") &&
                        slurp(kWork / "est_4.json") == slurp(kWork / "est_4b.json");

  std::ofstream(kWork / "sim.json") << R"({"alphas": [0.025], "simulation": {"experiment": "coverage",
    "n_grid": [60, 100], "replications": 8,
    "model": {"direct": [0, 0.3], "spillover": [0.3, 0.8], "threshold": 2}}})";
  for (const char* threads : {"1", "4"})
    ok = ok && run_cli("simulate --config " + (kWork / "sim.json").string() + " --seed 5 --threads " + threads +
                       " --out " + (kWork / (std::string("sim_") + threads + ".json")).string()) == 0;
  const bool sim_same = ok && slurp(kWork / "sim_1.json") == slurp(kWork / "sim_4.json") &&
                        slurp(kWork / "sim_1.csv") == slurp(kWork / "sim_4.csv");
  report(10, ok && est_same && sim_same, "byte-identical reports",
         fmt("estimate reports identical across --threads 1/4 and repeat: %s; simulate JSON and CSV identical: %s",
             est_same ? "yes" : "no", sim_same ? "yes" : "no"));
}

}  // namespace

int main() {
  fs::create_directories(kWork);
  try {
    exactness();
    relaxation_and_majorizer();
    coverage();
    normality();
    consistency();
    holder();
    fixture();
    determinism();
  } catch (const std::exception& e) {
    std::printf("FAIL: unexpected exception: %s\n", e.what());
    return 1;
  }
  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
