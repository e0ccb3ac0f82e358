#include <doctest.h>

#include <random>

#include "prevalence/hypothesis.hpp"
#include "prevalence/oracle.hpp"
#include "prevalence/sim.hpp"

using namespace prevalence;

namespace {

ThresholdResponse model_on(const AdjacencyGraph& g, double base_lo, double base_hi, double spill, std::uint64_t seed) {
  ModelConfig m;
  m.baseline_lo = base_lo;
  m.baseline_hi = base_hi;
  m.direct_lo = 0.0;
  m.direct_hi = 0.5;
  m.spillover_lo = spill;
  m.spillover_hi = spill;
  return draw_threshold_model(m, g, seed);
}

EngineConfig no_floor() {
  EngineConfig cfg;
  cfg.positivity_floor = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("no spillover means theta* equals Y") {
  const AdjacencyGraph g = ring_graph(20, 4);
  const PotentialOutcomeModel m = model_on(g, 0.0, 1.0, 0.0, 3);
  const Design d = Design::complete(20, 10);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Assignment x = sample_assignment(d, s);
    CHECK(true_theta_star(m, x, Level::unit) == realize_outcomes(m, x));
    CHECK(true_psi(m, x, Level::unit) == 0);
  }
}

TEST_CASE("baseline at one makes theta* all ones") {
  const AdjacencyGraph g = ring_graph(10, 2);
  const PotentialOutcomeModel m = model_on(g, 1.0, 1.0, 0.7, 3);
  const Assignment x = sample_assignment(Design::complete(10, 5), 1);
  CHECK(true_theta_star(m, x, Level::unit) == OutcomeVector(10, 1));
}

TEST_CASE("theta* agrees with the closed form") {
  const AdjacencyGraph g = random_bounded_degree_graph(8, 3, 2.5, 5);
  const ThresholdResponse t = model_on(g, 0.0, 1.0, 0.6, 9);
  const PotentialOutcomeModel m = t;
  for (std::uint64_t s = 0; s < 30; ++s) {
    const Assignment x = sample_assignment(Design::complete(8, 4), s);
    const OutcomeVector theta = true_theta_star(m, x, Level::unit);
    for (int i = 0; i < 8; ++i)
      CHECK(theta[i] == (t.baseline[i] + t.direct[i] * x[i] >= 1.0 ? 1 : 0));
  }
}

TEST_CASE("cluster-level theta* keeps the own cluster") {
  // Two clusters {0,1} and {2,3}; unit 0 responds to unit 1 only.
  LookupTable lt;
  lt.n_units = 4;
  lt.outcomes.resize(16);
  for (int mask = 0; mask < 16; ++mask) lt.outcomes[mask] = {static_cast<std::uint8_t>((mask >> 1) & 1), 0, 0, 0};
  const Design d(ClusterRandomization{{0, 0, 1, 1}, {0, 0}, {1}});
  const PotentialOutcomeModel m = lt;
  CHECK(true_theta_star(m, {1, 1, 0, 0}, Level::cluster, &d)[0] == 1);
  CHECK(true_theta_star(m, {1, 1, 0, 0}, Level::unit)[0] == 0);
}

TEST_CASE("exact variance of tau") {
  const std::vector<Edge> e{{0, 1}};
  const AdjacencyGraph g = build_graph(e, 4);
  const Design d = Design::complete(4, 2);
  const ExposureSpec spec = ExposureSpec::count(4, 1);
  const PropensityTable table = build_propensity_table(d, g, spec, no_floor());
  const UDefinition u{Variant::ipw, &table};

  LookupTable ones;
  ones.n_units = 4;
  ones.outcomes.assign(16, OutcomeVector(4, 1));
  // u_0 takes 3, -1.5, -1.5 when X_0 = 1 and 1.5, 1.5, -3 when X_0 = 0.
  CHECK(exact_var_tau(d, g, spec, u, ones, Level::unit) == doctest::Approx(4.5).epsilon(1e-14));

  LookupTable zeros = ones;
  zeros.outcomes.assign(16, OutcomeVector(4, 0));
  CHECK(exact_var_tau(d, g, spec, u, zeros, Level::unit) == 0.0);
}

TEST_CASE("expected variance estimate equals the variance of tau") {
  const AdjacencyGraph g = random_bounded_degree_graph(10, 3, 2.0, 13);
  const Design d = Design::complete(10, 5);
  const ExposureSpec spec = ExposureSpec::count(10, 1);
  const PropensityTable table = build_propensity_table(d, g, spec, no_floor());
  const PotentialOutcomeModel m = model_on(g, 0.3, 1.0, 0.5, 2);
  for (Variant v : {Variant::ipw, Variant::alt}) {
    const UDefinition u{v, &table};
    double mean_v = 0.0;
    int count = 0;
    enumerate_assignments(d, 1000, [&](const Assignment& x) {
      const QMatrix q = build_Q(d, g, spec, u, x, no_floor());
      mean_v += variance_estimate(q, to_vector(true_theta_star(m, x, Level::unit)));
      ++count;
    });
    CHECK(count == 252);
    CHECK(std::abs(mean_v / count - exact_var_tau(d, g, spec, u, m, Level::unit)) <= 1e-8);
  }
}

TEST_CASE("integer optimum") {
  const Eigen::Vector3d u(1, -1, 0.5);
  const Eigen::MatrixXd q = Eigen::Matrix3d::Identity();
  CHECK(integer_optimum(u, q, {1, 1, 0}, 1.0) == 0.0);
  CHECK(integer_optimum(Eigen::Vector3d(1, 1, 1), Eigen::Matrix3d::Zero(), {1, 1, 1}, 2.0) == 3.0);
  CHECK_THROWS(integer_optimum(Eigen::VectorXd::Ones(20), Eigen::MatrixXd::Zero(20, 20), OutcomeVector(20, 1), 1.0));
}

TEST_CASE("simplex solves small LPs") {
  Eigen::MatrixXd a(2, 2);
  a << 1, 2, 3, 1;
  const LpResult r = simplex_lp(Eigen::Vector2d(-1, -1), a, Eigen::Vector2d(4, 6));
  REQUIRE(r.status == LpResult::Status::optimal);
  CHECK(r.value == doctest::Approx(-2.8).epsilon(1e-12));
  CHECK(r.x(0) == doctest::Approx(1.6));
  CHECK(r.x(1) == doctest::Approx(1.2));

  Eigen::MatrixXd infeasible(1, 1);
  infeasible << 1;
  CHECK(simplex_lp(Eigen::VectorXd::Ones(1), infeasible, Eigen::VectorXd::Constant(1, -1)).status ==
        LpResult::Status::infeasible);

  Eigen::MatrixXd open(1, 2);
  open << 1, -1;
  CHECK(simplex_lp(Eigen::Vector2d(-1, 0), open, Eigen::VectorXd::Constant(1, 1)).status ==
        LpResult::Status::unbounded);
}
