#include <doctest.h>

#include "prevalence/exposure.hpp"

using namespace prevalence;

namespace {

AdjacencyGraph path3() {
  const std::vector<Edge> e{{0, 1}, {1, 0}, {1, 2}, {2, 1}};
  return build_graph(e, 3);
}

}  // namespace

TEST_CASE("count threshold on a path") {
  CHECK(compute_exposure(path3(), ExposureSpec::count(3, 1), {1, 0, 1}) == ExposureVector{0, 1, 0});
}

TEST_CASE("zero threshold exposes everyone with neighbors") {
  CHECK(compute_exposure(path3(), ExposureSpec::count(3, 0), {0, 0, 0}) == ExposureVector{1, 1, 1});
}

TEST_CASE("fraction threshold is at least the fraction") {
  const std::vector<Edge> e{{0, 1}, {0, 2}, {0, 3}, {0, 4}};
  const AdjacencyGraph g = build_graph(e, 5);
  const ExposureSpec spec = ExposureSpec::fraction(5, 0.5);
  CHECK(compute_exposure(g, spec, {0, 1, 1, 0, 0})[0] == 1);
  CHECK(compute_exposure(g, spec, {0, 1, 0, 0, 0})[0] == 0);
}

TEST_CASE("exposure on a subset") {
  const std::vector<Edge> e{{0, 2}, {0, 5}};
  const AdjacencyGraph g = build_graph(e, 6);
  const std::vector<int> five{5};
  CHECK(exposure_on_subset(g, ExposureSpec::count(6, 1), 0, 0, five) == 1);
  CHECK(exposure_on_subset(g, ExposureSpec::count(6, 2), 0, 1, five) == 0);
  CHECK(exposure_on_subset(g, ExposureSpec::count(6, 1), 1, 0, {}) == 0);
  const std::vector<int> outside{3};
  CHECK_THROWS(exposure_on_subset(g, ExposureSpec::count(6, 1), 0, 0, outside));
}

TEST_CASE("empty neighborhoods take w_empty") {
  const AdjacencyGraph g = build_graph({}, 3);
  ExposureSpec spec = ExposureSpec::count(3, 0);
  CHECK(compute_exposure(g, spec, {1, 0, 1}) == ExposureVector{0, 0, 0});
  spec.w_empty = 1;
  CHECK(compute_exposure(g, spec, {1, 0, 1}) == ExposureVector{1, 1, 1});
}

TEST_CASE("exposure is local") {
  // Unit 0 sees only unit 1; flipping units 2 and 3 cannot change W_0.
  const std::vector<Edge> e{{0, 1}, {2, 3}};
  const AdjacencyGraph g = build_graph(e, 4);
  const ExposureSpec spec = ExposureSpec::count(4, 1);
  for (int mask = 0; mask < 16; ++mask) {
    Assignment x(4);
    for (int k = 0; k < 4; ++k) x[k] = (mask >> k) & 1;
    CHECK(compute_exposure(g, spec, x)[0] == x[1]);
  }
}

TEST_CASE("minimum exposing count") {
  const std::vector<Edge> e{{0, 1}, {0, 2}, {0, 3}};
  const AdjacencyGraph g = build_graph(e, 4);
  CHECK(exposure_min_count(g, ExposureSpec::count(4, 2), 0) == 2);
  CHECK(exposure_min_count(g, ExposureSpec::count(4, 5), 0) == 4);
  CHECK(exposure_min_count(g, ExposureSpec::fraction(4, 0.5), 0) == 2);
}

TEST_CASE("invalid thresholds and cluster edges are rejected") {
  const AdjacencyGraph g = path3();
  CHECK_THROWS(validate_exposure(g, ExposureSpec::count(3, -1)));
  CHECK_THROWS(validate_exposure(g, ExposureSpec::fraction(3, 1.5)));
  CHECK_THROWS(validate_exposure(g, ExposureSpec::count(4, 1)));
  const Design d(ClusterRandomization{{0, 0, 1}, {0, 0}, {1}});
  CHECK_THROWS(validate_cluster_graph(g, d));
}
