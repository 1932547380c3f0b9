#include "cdgps/iar.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace cdgps;
using namespace cdgps::iar;

namespace {

MatX random_spd(std::mt19937_64& g, int n, double scale) {
  std::normal_distribution<double> nd;
  MatX a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = nd(g);
  return scale * (a * a.transpose() + 0.05 * MatX::Identity(n, n));
}

// Exhaustive minimum of the quadratic cost over a box around the float.
double brute_force_min(const AmbiguityDistribution& d, int half) {
  const int n = d.size();
  IntVec c(n), lo(n);
  for (int i = 0; i < n; ++i) lo(i) = static_cast<std::int64_t>(std::round(d.floats(i))) - half;
  double best = std::numeric_limits<double>::infinity();
  const int w = 2 * half + 1;
  int total = 1;
  for (int i = 0; i < n; ++i) total *= w;
  for (int k = 0; k < total; ++k) {
    int r = k;
    for (int i = 0; i < n; ++i) {
      c(i) = lo(i) + r % w;
      r /= w;
    }
    best = std::min(best, quadratic_cost(d, c));
  }
  return best;
}

}  // namespace

TEST_CASE("ldl factors reproduce the matrix") {
  std::mt19937_64 g(7);
  for (int n = 1; n <= 6; ++n) {
    const MatX q = random_spd(g, n, 1.0);
    const LdlFactors f = ldl_decompose(q);
    const MatX back = f.lower * f.diag.asDiagonal() * f.lower.transpose();
    CHECK((back - q).norm() < 1e-10 * q.norm());
    for (int i = 0; i < n; ++i) CHECK(f.lower(i, i) == doctest::Approx(1.0));
    CHECK(f.diag.minCoeff() > 0.0);
  }
}

TEST_CASE("ldl reports the failing pivot") {
  MatX q(3, 3);
  q << 4, 2, 0, 2, 1, 0, 0, 0, 1;  // second pivot is zero
  try {
    ldl_decompose(q);
    FAIL("expected DecompositionError");
  } catch (const DecompositionError& e) {
    CHECK(e.pivot() >= 1);
    CHECK(e.pivot() <= 3);
  }
}

TEST_CASE("rounding ties go away from zero") {
  CHECK(round_integer(0.5) == 1);
  CHECK(round_integer(-0.5) == -1);
  CHECK(round_integer(2.5) == 3);
  CHECK(round_integer(-2.4) == -2);
}

TEST_CASE("decorrelation lowers a strong correlation") {
  MatX q(2, 2);
  q << 1.0, 0.99, 0.99, 1.0;
  VecX f(2);
  f << 0.3, -1.7;
  const auto d = decorrelate(make_distribution(f, q));
  CHECK(max_correlation(d.covariance) < 0.99);
  CHECK(std::abs(static_cast<double>(
            (d.z_matrix.cast<double>().determinant()))) == doctest::Approx(1.0));
}

TEST_CASE("Z round trip is exact") {
  std::mt19937_64 g(11);
  for (int trial = 0; trial < 20; ++trial) {
    const MatX q = random_spd(g, 4, 0.3);
    const auto d = decorrelate(make_distribution(VecX::Zero(4), q));
    IntVec n(4);
    n << 3, -7, 12, 0;
    CHECK(d.to_original(d.to_current(n)) == n);
  }
}

TEST_CASE("bootstrap on a diagonal covariance is plain rounding") {
  VecX f(3);
  f << 1.2, -3.6, 7.49;
  const auto d = make_distribution(f, MatX::Identity(3, 3) * 0.01);
  const IntVec b = bootstrap(d);
  CHECK(b(0) == 1);
  CHECK(b(1) == -4);
  CHECK(b(2) == 7);
}

TEST_CASE("classical search matches brute force") {
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 3;
    VecX f(n);
    for (int i = 0; i < n; ++i) f(i) = u(g);
    const auto d = decorrelate(make_distribution(f, random_spd(g, n, 0.2)));
    const auto r = classical_ils_search(d);
    CHECK(r.cost_best == doctest::Approx(brute_force_min(d, 6)).epsilon(1e-9));
    CHECK(r.cost_second >= r.cost_best);
    CHECK(r.best != r.second_best);
  }
}

TEST_CASE("success rate closed form") {
  VecX d = VecX::Constant(10, std::sqrt(0.0835));
  CHECK(success_rate(d, 10) == doctest::Approx(0.28).epsilon(0.02));
  VecX tiny = VecX::Constant(3, 1e-4);
  CHECK(success_rate(tiny, 3) == doctest::Approx(1.0));
  VecX huge = VecX::Constant(1, 1e3);
  CHECK(success_rate(huge, 1) < 1e-3);
  VecX mixed(3);
  mixed << 0.1, 0.2, 0.3;
  CHECK(success_rate(mixed, 3, 1.0, 0.5) == doctest::Approx(success_rate(mixed, 3)));
  CHECK(success_rate(mixed, 3, 0.4, 0.0) == doctest::Approx(success_rate(mixed, 3)));
  CHECK(success_rate(mixed, 3, 0.4, 1.0) < success_rate(mixed, 3, 0.8, 1.0));
}

TEST_CASE("discrimination test") {
  CHECK(discrimination_test(1.0, 3.5, 3.0));
  CHECK_FALSE(discrimination_test(1.0, 1.0, 3.0));
  CHECK_FALSE(discrimination_test(0.0, 0.0, 3.0));
  CHECK(discrimination_test(0.0, 0.1, 3.0));
}

TEST_CASE("partial resolution keeps the precise prefix") {
  VecX f(3);
  f << 4.001, -2.002, 0.4;
  VecX sd(3);
  sd << 0.01, 0.02, 10.0;
  const MatX q = sd.cwiseProduct(sd).asDiagonal();
  const auto d = make_distribution(f, q);
  const auto r = classical_ils_search(d);
  const auto p = partial_resolve(d, r, 0.99, 3.0);
  REQUIRE(p.fixed_indices.size() == 2);
  CHECK(p.fixed_indices[0] == 0);
  CHECK(p.fixed_indices[1] == 1);
  CHECK(p.fixed_values(0) == 4);
  CHECK(p.fixed_values(1) == -2);
}

TEST_CASE("partial resolution rejects everything when imprecise") {
  VecX f(2);
  f << 0.4, 0.6;
  const auto d = make_distribution(f, MatX::Identity(2, 2) * 4.0);
  const auto p = partial_resolve(d, classical_ils_search(d), 0.99, 3.0);
  CHECK(p.fixed_indices.empty());
}

TEST_CASE("fixing is idempotent") {
  VecX f(3);
  f << 1.0, 2.003, 5.3;
  VecX var(3);
  var << 1e-12, 1e-4, 2.0;
  const auto d = make_distribution(f, MatX(var.asDiagonal()));
  const auto p = partial_resolve(d, classical_ils_search(d), 0.99, 3.0);
  REQUIRE(p.fixed_indices.size() >= 1);
  CHECK(p.fixed_indices[0] == 0);
}

TEST_CASE("candidate baseline") {
  ConstraintContext ctx;
  ctx.geometry = MatX::Identity(3, 3);
  ctx.ddcp_phases = VecX::Zero(3);
  ctx.ddcp_phases(0) = 1.0;
  ctx.wavelength = 0.1905;
  const Vec3 b = candidate_baseline(ctx, IntVec::Zero(3));
  CHECK(b.x() == doctest::Approx(0.1905));
  CHECK(b.y() == doctest::Approx(0.0));

  // Overdetermined round trip.
  MatX g(5, 3);
  g << 1, 0, 0, 0, 1, 0, 0, 0, 1, 0.6, 0.8, 0, 0, 0.6, -0.8;
  const Vec3 rho(1.3, -0.4, 2.2);
  IntVec n(5);
  n << 3, -1, 4, 0, 7;
  ctx.geometry = g;
  ctx.ddcp_phases = g * rho / ctx.wavelength + n.cast<double>();
  CHECK((candidate_baseline(ctx, n) - rho).norm() < 1e-9);

  ctx.geometry = MatX::Zero(3, 3);
  ctx.ddcp_phases = VecX::Zero(3);
  CHECK_THROWS_AS(candidate_baseline(ctx, IntVec::Zero(3)), SingularGeometryError);
}

TEST_CASE("penalty cost") {
  ConstraintContext ctx;
  ctx.range = 100.0;
  ctx.sigma_range = 0.5;
  ctx.range_enabled = true;
  CHECK(penalty_cost(ctx, {100.0, 0.0, 0.0}) == doctest::Approx(0.0));
  CHECK(penalty_cost(ctx, {100.5, 0.0, 0.0}) == doctest::Approx(1.0));

  ConstraintContext a;
  a.estimated_range = 40.0;
  a.azimuth = 0.02;
  a.sigma_azimuth = 0.01;
  a.sigma_elevation = 0.01;
  a.azimuth_enabled = true;
  a.elevation_enabled = true;
  CHECK(penalty_cost(a, {40.0, 0.0, 0.0}) == doctest::Approx(0.1));
}

TEST_CASE("constrained search without sensors stays near the classical optimum") {
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  int hits = 0;
  const int trials = 40;
  for (int trial = 0; trial < trials; ++trial) {
    VecX f(2);
    f << u(g), u(g);
    const auto d = decorrelate(make_distribution(f, random_spd(g, 2, 0.2)));
    ConstraintContext ctx;
    ctx.geometry = MatX::Identity(2, 3);
    ctx.ddcp_phases = VecX::Zero(2);
    const auto c = constrained_search(d, ctx);
    const auto r = classical_ils_search(d);
    CHECK(c.cost_best >= r.cost_best - 1e-9);
    CHECK(c.cost_best <= quadratic_cost(d, bootstrap(d)) + 1e-9);
    if (std::abs(c.cost_best - r.cost_best) < 1e-9) ++hits;
  }
  CHECK(hits >= trials * 9 / 10);
}
