#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "prevalence/interval.hpp"
#include "prevalence/oracle.hpp"

using namespace prevalence;

namespace {

UVector u_of(const Eigen::VectorXd& v) {
  UVector u;
  u.u = v;
  u.excluded.assign(static_cast<std::size_t>(v.size()), 0);
  return u;
}

QMatrix q_of(const Eigen::MatrixXd& m) {
  QMatrix q;
  q.q = m;
  return q;
}

double lambda_max(const Eigen::MatrixXd& a) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a).eigenvalues().maxCoeff();
}

// A random second-moment-like matrix with negative eigenvalues.
Eigen::MatrixXd random_symmetric(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd b(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) b(i, j) = z(rng);
  Eigen::MatrixXd q = b * b.transpose() / n;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double s = z(rng) * 0.3;
      q(i, j) += s;
      q(j, i) += s;
    }
  return q;
}

}  // namespace

TEST_CASE("Gershgorin majorizer") {
  Eigen::Matrix2d q;
  q << 1, 0.5, 0.5, 1;
  const DiagonalMajorizer d = gershgorin_majorizer(q);
  CHECK(d.d(0) == 1.5);
  CHECK(d.d(1) == 1.5);
  const Eigen::Vector2d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(q - Eigen::Matrix2d(d.d.asDiagonal())).eigenvalues();
  CHECK(ev(0) == doctest::Approx(-1.0));
  CHECK(std::abs(ev(1)) <= 1e-12);
  CHECK(d.certificate.valid());

  const Eigen::Vector3d diag(1, 2, 0.5);
  CHECK(gershgorin_majorizer(Eigen::MatrixXd(diag.asDiagonal())).d == Eigen::VectorXd(diag));
  CHECK(gershgorin_majorizer(Eigen::MatrixXd::Zero(3, 3)).d.isZero(0.0));
}

TEST_CASE("refined majorizer on the 2x2 example") {
  Eigen::MatrixXd q(2, 2);
  q << 1, 0.5, 0.5, 1;
  const DiagonalMajorizer r = refine_majorizer(q, gershgorin_majorizer(q), SolverConfig{});
  CHECK(std::abs(r.trace() - 3.0) <= 1e-6);
  CHECK(r.certificate.valid());

  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 2);
  CHECK(refine_majorizer(zero, gershgorin_majorizer(zero), SolverConfig{}).d.isZero(0.0));
}

TEST_CASE("refinement never loses the certificate") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd q = random_symmetric(8, rng);
    const DiagonalMajorizer g = gershgorin_majorizer(q);
    const DiagonalMajorizer r = refine_majorizer(q, g, SolverConfig{});
    CHECK(r.trace() <= g.trace() + 1e-12);
    CHECK(r.certificate.valid());
    CHECK(lambda_max(q - Eigen::MatrixXd(r.d.asDiagonal())) <= 1e-8);
    CHECK(r.d.minCoeff() >= 0.0);
  }
}

TEST_CASE("power iteration matches a dense eigensolver") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd a = random_symmetric(12, rng) - 2.0 * Eigen::MatrixXd::Identity(12, 12);
    CHECK(power_lambda_max(a, 5000, 1e-13) == doctest::Approx(lambda_max(a)).epsilon(1e-6));
  }
}

TEST_CASE("relaxation is zero when Y is in the confidence set") {
  const UVector u = u_of(Eigen::Vector2d(1, -1));
  const Eigen::MatrixXd q = Eigen::Matrix2d::Identity();
  const DiagonalMajorizer d = gershgorin_majorizer(q);
  const RelaxationResult r = solve_relaxation(u, q, d, {1, 1}, 1.96, SolverConfig{});
  CHECK(r.value == 0.0);
}

TEST_CASE("degenerate majorizer collapses the constraint") {
  const UVector u = u_of(Eigen::Vector2d(1, 1));
  const Eigen::MatrixXd q = Eigen::Matrix2d::Zero();
  DiagonalMajorizer d;
  d.d = Eigen::Vector2d::Zero();
  const RelaxationResult r = solve_relaxation(u, q, d, {1, 1}, 1.96, SolverConfig{});
  CHECK(r.value == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("backup program") {
  const UVector u = u_of(Eigen::Vector2d(1, 1));
  CHECK(solve_backup(u, {1, 1}, 2) == doctest::Approx(2.0 - std::cbrt(2.0)).epsilon(1e-12));
  CHECK(solve_backup(u_of(Eigen::Vector3d(1, -1, 0.5)), {1, 1, 1}, 3) == 0.0);
  CHECK(solve_backup(u_of(Eigen::Vector2d::Zero()), {1, 1}, 2) == 0.0);
}

TEST_CASE("combined interval takes the smaller program") {
  const UVector u = u_of(Eigen::Vector2d(1, 1));
  const IntervalResult r = combined_interval(u, q_of(Eigen::Matrix2d::Zero()), {1, 1}, 0.025, SolverConfig{});
  CHECK(r.relaxation_value == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(r.backup_value == doctest::Approx(2.0 - std::cbrt(2.0)).epsilon(1e-12));
  CHECK(r.lower_bound_units == r.backup_value);
  CHECK(r.active_program == "backup");
  CHECK(r.lower_bound_fraction == doctest::Approx(r.lower_bound_units / 2));
  CHECK(r.confidence_level == doctest::Approx(0.95));

  const IntervalResult zero =
      combined_interval(u_of(Eigen::Vector2d(1, -1)), q_of(Eigen::Matrix2d::Identity()), {1, 1}, 0.025, SolverConfig{});
  CHECK(zero.lower_bound_units == 0.0);
}

TEST_CASE("normal quantile") {
  CHECK(z_quantile(0.025) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(z_quantile(0.05) == doctest::Approx(1.6448536269514722).epsilon(1e-12));
  CHECK_THROWS(z_quantile(0.0));
}

TEST_CASE("relaxation lower-bounds the integer program") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 15; ++trial) {
    const int n = 10;
    Eigen::VectorXd uv(n);
    OutcomeVector y(n);
    for (int i = 0; i < n; ++i) {
      uv(i) = z(rng) * 2 + 1.5;
      y[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(rng() % 2);
    }
    const Eigen::MatrixXd q = random_symmetric(n, rng);
    const DiagonalMajorizer d = extract_majorizer(q, SolverConfig{});
    const RelaxationResult r = solve_relaxation(u_of(uv), q, d, y, 1.0, SolverConfig{});
    CHECK(r.value <= integer_optimum(uv, q, y, 1.0) + 1e-6);
  }
}

TEST_CASE("greedy backup matches a general LP") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 8;
    Eigen::VectorXd u(n);
    OutcomeVector y(n);
    for (int i = 0; i < n; ++i) {
      u(i) = z(rng) + 0.5;
      y[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(rng() % 2);
    }
    const double bound = std::cbrt(static_cast<double>(n));
    CHECK(std::abs(solve_linear_bound(u, y, bound) - linear_bound_lp(u, y, bound)) <= 1e-9);
  }
}
