#include "cdgps/orbit.hpp"

#include <doctest.h>

#include <cmath>

using namespace cdgps;
using namespace cdgps::orbit;

namespace {

KeplerElements leo() {
  return {constants::kEarthRadius + 370e3, 1e-3, 51.6 * constants::kDeg, 0.5, 0.2, 0.1, 0.0};
}

double energy(const OrbitState& s) {
  return 0.5 * s.velocity.squaredNorm() - constants::kEarthMu / s.position.norm();
}

}  // namespace

TEST_CASE("kepler round trip") {
  const KeplerElements el = leo();
  const OrbitState s = kepler_to_state(el, 0.0);
  const KeplerElements back = state_to_kepler(s);
  CHECK(back.a == doctest::Approx(el.a).epsilon(1e-9));
  CHECK(back.e == doctest::Approx(el.e).epsilon(1e-6));
  CHECK(back.i == doctest::Approx(el.i).epsilon(1e-9));
  CHECK(back.raan == doctest::Approx(el.raan).epsilon(1e-9));
}

TEST_CASE("period from Kepler's third law") {
  const double a = constants::kEarthRadius + 370e3;
  const double t = 2.0 * constants::kPi * std::sqrt(a * a * a / constants::kEarthMu);
  CHECK(orbital_period(a) == doctest::Approx(t));
  CHECK(orbital_period(a) / 60.0 == doctest::Approx(92.0).epsilon(0.01));
}

TEST_CASE("two-body propagation conserves energy and closes the orbit") {
  const KeplerElements el = leo();
  const OrbitState s0 = kepler_to_state(el, 0.0);
  PropagationOptions o;
  o.j2 = false;
  o.max_step = 5.0;
  const double p = orbital_period(el.a);
  const OrbitState s1 = propagate(s0, p, Vec3::Zero(), o);
  CHECK(energy(s1) == doctest::Approx(energy(s0)).epsilon(1e-9));
  CHECK((s1.position - s0.position).norm() < 1.0);
  // Analytic two-body reference at an intermediate time.
  const OrbitState half = propagate(s0, 1234.0, Vec3::Zero(), o);
  CHECK((half.position - kepler_to_state(el, 1234.0).position).norm() < 1e-2);
  // Backward propagation returns to the start.
  const OrbitState back = propagate(half, -1234.0, Vec3::Zero(), o);
  CHECK((back.position - s0.position).norm() < 1e-3);
}

TEST_CASE("J2 drifts the node westward for prograde orbits") {
  const KeplerElements el = leo();
  const OrbitState s0 = kepler_to_state(el, 0.0);
  const OrbitState s1 = propagate(s0, 86'400.0, Vec3::Zero());
  const double d_raan = wrap_angle(state_to_kepler(s1).raan - el.raan);
  // Secular rate -1.5 n J2 (Re/p)^2 cos i.
  const double n = std::sqrt(constants::kEarthMu / std::pow(el.a, 3));
  const double rate = -1.5 * n * constants::kEarthJ2 *
                      std::pow(constants::kEarthRadius / el.a, 2) * std::cos(el.i);
  CHECK(d_raan == doctest::Approx(rate * 86'400.0).epsilon(0.05));
}

TEST_CASE("RTN empirical acceleration acts along track") {
  const OrbitState s0 = kepler_to_state(leo(), 0.0);
  const Mat3 rtn = rtn_frame(s0);
  const Vec3 a = acceleration(s0.position, s0.velocity, Vec3(0, 1e-3, 0), false) -
                 acceleration(s0.position, s0.velocity, Vec3::Zero(), false);
  CHECK((rtn * a - Vec3(0, 1e-3, 0)).norm() < 1e-12);
  CHECK((rtn * rtn.transpose() - Mat3::Identity()).norm() < 1e-12);
  CHECK((rtn.row(0).transpose() - s0.position.normalized()).norm() < 1e-12);
}

TEST_CASE("ECI to ECEF is a rotation about z") {
  const Mat3 r = eci_to_ecef(3600.0);
  CHECK((r * r.transpose() - Mat3::Identity()).norm() < 1e-12);
  CHECK((r * Vec3::UnitZ() - Vec3::UnitZ()).norm() < 1e-12);
  const double ang = std::atan2(r(0, 1), r(0, 0));
  CHECK(ang == doctest::Approx(constants::kEarthRotationRate * 3600.0));
}

TEST_CASE("propagation rejects invalid states") {
  OrbitState s;
  s.position = Vec3(1000.0, 0, 0);
  s.velocity = Vec3(0, 1, 0);
  CHECK_THROWS_AS(s.validate(), PropagationError);
  s.position = Vec3(std::nan(""), 0, 0);
  CHECK_THROWS_AS(s.validate(), PropagationError);
}

TEST_CASE("nominal constellation") {
  const auto c = GpsConstellation::nominal();
  CHECK(c.satellites.size() == 31);
  for (const auto& s : c.satellites) CHECK(s.elements.a == doctest::Approx(26'560e3));
}

TEST_CASE("visibility geometry") {
  const auto c = GpsConstellation::nominal();
  const Vec3 rx(constants::kEarthRadius + 400e3, 0, 0);
  // Directly overhead satellite on the far side of the receiver from Earth.
  const Vec3 above(26'560e3, 0, 0);
  const Visibility v = visibility(rx, above, c, LobeMode::kMainlobe);
  CHECK(v.visible);
  CHECK_FALSE(v.occluded);
  CHECK(v.in_mainlobe);
  CHECK(v.off_boresight == doctest::Approx(0.0));
  // Opposite side of the Earth.
  const Visibility hidden = visibility(rx, Vec3(-26'560e3, 0, 0), c, LobeMode::kSidelobe);
  CHECK(hidden.occluded);
  CHECK_FALSE(hidden.visible);
}
