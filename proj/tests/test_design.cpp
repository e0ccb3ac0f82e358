#include <doctest.h>

#include <map>

#include "prevalence/design.hpp"

using namespace prevalence;

namespace {

int ones(const Assignment& x) { return static_cast<int>(std::count(x.begin(), x.end(), 1)); }

}  // namespace

TEST_CASE("complete design draws the right count") {
  const Design d = Design::complete(4, 2);
  for (std::uint64_t s = 0; s < 200; ++s) CHECK(ones(sample_assignment(d, s)) == 2);
}

TEST_CASE("complete design is uniform over its support") {
  const Design d = Design::complete(4, 2);
  std::map<Assignment, int> freq;
  Rng rng(5);
  const int draws = 60000;
  for (int r = 0; r < draws; ++r) ++freq[sample_assignment(d, rng)];
  REQUIRE(freq.size() == 6);
  const double p = 1.0 / 6.0, se = std::sqrt(p * (1 - p) / draws);
  double chi2 = 0.0;
  for (const auto& [x, c] : freq) {
    const double f = static_cast<double>(c) / draws;
    CHECK(std::abs(f - p) <= 3 * se);
    chi2 += (c - draws * p) * (c - draws * p) / (draws * p);
  }
  CHECK(chi2 < 20.5);  // 0.999 quantile of chi-square with 5 df
}

TEST_CASE("cluster design keeps clusters together") {
  const Design d(ClusterRandomization{{0, 0, 1, 1}, {0, 0}, {1}});
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Assignment x = sample_assignment(d, s);
    CHECK((x == Assignment{1, 1, 0, 0} || x == Assignment{0, 0, 1, 1}));
  }
}

TEST_CASE("conditional sampling with one fixed unit") {
  const Design d = Design::complete(4, 2);
  const std::vector<Condition> fixed{{0, 1}};
  std::map<int, int> which;
  Rng rng(9);
  const int draws = 30000;
  for (int r = 0; r < draws; ++r) {
    const Assignment x = sample_conditional(d, fixed, rng);
    REQUIRE(x[0] == 1);
    REQUIRE(ones(x) == 2);
    for (int k = 1; k < 4; ++k)
      if (x[k]) ++which[k];
  }
  const double p = 1.0 / 3.0, se = std::sqrt(p * (1 - p) / draws);
  for (int k = 1; k < 4; ++k) CHECK(std::abs(which[k] / double(draws) - p) <= 4 * se);
}

TEST_CASE("conditional sampling with two fixed units") {
  const Design d = Design::complete(4, 2);
  const std::vector<Condition> fixed{{0, 1}, {1, 0}};
  int unit2 = 0;
  const int draws = 20000;
  for (int r = 0; r < draws; ++r) {
    const Assignment x = sample_conditional(d, fixed, std::uint64_t(r));
    REQUIRE(x[0] == 1);
    REQUIRE(x[1] == 0);
    REQUIRE(x[2] + x[3] == 1);
    unit2 += x[2];
  }
  CHECK(std::abs(unit2 / double(draws) - 0.5) <= 4 * std::sqrt(0.25 / draws));
}

TEST_CASE("degenerate or infeasible designs are rejected") {
  CHECK_THROWS_AS(Design::complete(4, 0), std::invalid_argument);
  CHECK_THROWS_AS(Design::complete(4, 4), std::invalid_argument);
  const Design d = Design::complete(4, 1);
  const std::vector<Condition> both{{0, 1}, {1, 1}};
  CHECK_THROWS_AS(condition_design(d, both), InfeasibleCondition);
}

TEST_CASE("enumeration") {
  int count = 0;
  enumerate_assignments(Design::complete(4, 2), 1000, [&](const Assignment&) { ++count; });
  CHECK(count == 6);

  count = 0;
  const Design strat(StratifiedRandomization{{0, 0, 1, 1}, {1, 1}});
  enumerate_assignments(strat, 1000, [&](const Assignment& x) {
    CHECK(x[0] + x[1] == 1);
    CHECK(in_support(strat, x));
    ++count;
  });
  CHECK(count == 4);

  try {
    enumerate_assignments(Design::complete(40, 20), 1000000, [](const Assignment&) {});
    FAIL("expected SupportTooLarge");
  } catch (const SupportTooLarge& e) {
    CHECK(e.support() == BigInt("137846528820"));
  }
}

TEST_CASE("support size") {
  CHECK(support_size(Design::complete(4, 2)) == 6);
  CHECK(support_size(Design::complete(50, 25)) == BigInt("126410606437752"));
  const Design cl(ClusterRandomization{{0, 1, 2, 3, 4}, {0, 0, 0, 0, 0}, {2}});
  CHECK(support_size(cl) == 10);
}

TEST_CASE("marginals and rho diagnostics") {
  const Design d(StratifiedRandomization{{0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1}, {1, 5}});
  CHECK(d.marginal_treated(0) == doctest::Approx(0.25));
  CHECK(d.marginal_treated(5) == doctest::Approx(0.5));
  CHECK(d.rho_violations(0.3) == std::vector<int>{0});
  CHECK(d.rho_violations(0.1).empty());
}
