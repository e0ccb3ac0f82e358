#include <doctest.h>

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "prevalence/sim.hpp"

using namespace prevalence;

TEST_CASE("graph generators are bounded-degree") {
  const AdjacencyGraph ring = ring_graph(30, 4);
  for (int i = 0; i < 30; ++i) CHECK(ring.out_degree(i) == 4);
  CHECK(ring.has_edge(0, 29));
  CHECK(ring.has_edge(0, 2));

  const AdjacencyGraph rnd = random_bounded_degree_graph(200, 5, 3.0, 4);
  CHECK(rnd.max_degree() <= 5);
  CHECK(rnd.edge_count() > 0);
  for (int i = 0; i < 200; ++i)
    for (int j : rnd.out_neighbors(i)) CHECK(rnd.has_edge(j, i));

  const ClusterGeometry geo = cluster_line(6, 3, 1);
  for (int i = 0; i < 18; ++i)
    for (int j : geo.graph.out_neighbors(i)) {
      CHECK(geo.cluster_of[i] != geo.cluster_of[j]);
      CHECK(std::abs(geo.cluster_of[i] - geo.cluster_of[j]) <= 1);
    }
}

TEST_CASE("permutation keeps the degree sequence shape") {
  const AdjacencyGraph g = ring_graph(50, 4);
  const AdjacencyGraph same = permute_graph(g, 0.0, 1);
  CHECK(same.edges() == g.edges());
  const AdjacencyGraph moved = permute_graph(g, 0.3, 1);
  CHECK(moved.edge_count() == g.edge_count());
  CHECK(moved.edges() != g.edges());
}

TEST_CASE("null model covers psi = 0") {
  SimConfig cfg;
  cfg.n_grid = {60};
  cfg.replications = 20;
  cfg.alphas = {0.025};
  cfg.model.direct_hi = 0.5;
  const CoverageReport r = run_coverage(cfg);
  REQUIRE(r.cells.size() == 1);
  CHECK(r.cells[0].mean_psi == 0.0);
  CHECK(r.cells[0].coverage >= 0.95);
  CHECK(r.cells[0].mean_bound >= 0.0);
}

TEST_CASE("zero theta* is flagged as degenerate") {
  SimConfig cfg;
  cfg.experiment = "normality";
  cfg.n_grid = {40};
  cfg.replications = 50;
  cfg.model.baseline_hi = 0.0;
  const NormalityReport r = run_normality(cfg);
  CHECK(r.cells[0].degenerate);
  CHECK(r.cells[0].var_tau == 0.0);
  CHECK(std::isnan(r.cells[0].ks));
}

TEST_CASE("point estimate is close without spillover") {
  SimConfig cfg;
  cfg.experiment = "consistency";
  cfg.n_grid = {250};
  cfg.replications = 100;
  cfg.analysis.variant = Variant::alt;
  cfg.analysis.engine.positivity_floor = 0.1;
  cfg.model.baseline_lo = cfg.model.baseline_hi = 0.8;
  cfg.model.direct_lo = cfg.model.direct_hi = 0.5;
  cfg.model.threshold = 2;
  const ConsistencyReport r = run_consistency(cfg);
  CHECK(r.cells[0].mean_psi_fraction == 0.0);
  CHECK(r.cells[0].median <= 0.1);
}

TEST_CASE("KS distance of an ideal sample") {
  std::vector<double> q;
  const int n = 1000;
  // Midpoint quantiles give a KS distance of exactly 1 / (2n).
  for (int i = 0; i < n; ++i) {
    q.push_back(boost::math::quantile(boost::math::normal_distribution<double>(), (i + 0.5) / n));
  }
  CHECK(ks_standard_normal(q) == doctest::Approx(0.5 / n).epsilon(1e-6));
  CHECK(ks_standard_normal(std::vector<double>(10, 100.0)) == doctest::Approx(1.0));
}

TEST_CASE("reports do not depend on the thread count") {
  SimConfig cfg;
  cfg.n_grid = {40, 60};
  cfg.replications = 6;
  cfg.model.spillover_lo = 0.3;
  cfg.model.spillover_hi = 0.8;
  cfg.model.threshold = 2;
  const CoverageReport a = run_coverage(cfg);
  cfg.threads = 3;
  const CoverageReport b = run_coverage(cfg);
  for (std::size_t k = 0; k < a.cells.size(); ++k) {
    CHECK(a.cells[k].mean_bound == b.cells[k].mean_bound);
    CHECK(a.cells[k].mean_point_estimate == b.cells[k].mean_point_estimate);
    CHECK(a.cells[k].misses == b.cells[k].misses);
  }
}

TEST_CASE("invalid configurations are rejected") {
  SimConfig cfg;
  cfg.n_grid = {400, 250};
  CHECK_THROWS(validate_sim_config(cfg));
  cfg.n_grid = {100};
  cfg.replications = 0;
  CHECK_THROWS(validate_sim_config(cfg));
  cfg.replications = 1;
  cfg.experiment = "power";
  CHECK_THROWS(validate_sim_config(cfg));
}
