#include "cdgps/error_models.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace cdgps;
using namespace cdgps::errors;

TEST_CASE("free-space path loss") {
  // -20 log10(4 pi d f / c) evaluated independently.
  const double d = 20'000e3, f = 1575.42e6;
  const double ref = -20.0 * std::log10(4.0 * constants::kPi * d * f / constants::kSpeedOfLight);
  CHECK(free_space_path_loss(20'000.0, 1575.42) == doctest::Approx(ref).epsilon(1e-12));
  CHECK(free_space_path_loss(40'000.0, 1575.42) - free_space_path_loss(20'000.0, 1575.42) ==
        doctest::Approx(-20.0 * std::log10(2.0)));
}

TEST_CASE("link budget columns") {
  const auto leo = evaluate(LinkBudget::leo());
  const auto geo = evaluate(LinkBudget::geo());
  CHECK(std::abs(leo.c_n0 - 45.0) < 0.2);
  CHECK(std::abs(geo.c_n0 - 16.45) < 0.2);
  CHECK(leo.eirp == doctest::Approx(26.5));
  CHECK(geo.eirp == doctest::Approx(10.0));
  LinkBudget with_atm = LinkBudget::leo();
  with_atm.apply_atmospheric_loss = true;
  CHECK(carrier_to_noise(with_atm) == doctest::Approx(leo.c_n0 - 0.1));
}

TEST_CASE("thermal noise anchors and scaling") {
  const auto s = thermal_noise_sigmas(45.0, 15.0, constants::kL1Wavelength);
  CHECK(s.code == doctest::Approx(0.20).epsilon(1e-9));
  CHECK(s.phase == doctest::Approx(0.002).epsilon(1e-9));
  const auto w = thermal_noise_sigmas(35.0, 15.0, constants::kL1Wavelength);
  CHECK(w.code > s.code);
  CHECK(w.phase > s.phase);
  CHECK_THROWS_AS(thermal_noise_sigmas(10.0, 15.0, constants::kL1Wavelength), LossOfLockError);
}

TEST_CASE("near and far field multipath") {
  CHECK(near_field_multipath(0.05, 0.0) == doctest::Approx(0.05));
  CHECK(near_field_multipath(0.05, constants::kPi / 2) == doctest::Approx(0.0));
  CHECK(near_field_multipath(0.05, constants::kPi / 3) == doctest::Approx(0.0125));

  const double a = 0.05, s = 5.0, r = 40.0;
  const double peak = far_field_multipath(a, s, r, 0.0, 0.0);
  CHECK(peak == doctest::Approx(a / std::pow(a * r + 1.0, 2)));
  CHECK(far_field_multipath(a, s, r, 0.1, 0.0) < peak);
  CHECK(far_field_multipath(a, s, r, 0.1, 0.0) ==
        doctest::Approx(peak * std::exp(-(r / s) * 0.01)));
}

TEST_CASE("multipath sigma peaks toward the target") {
  MultipathParams p;
  p.amplitude_phase = 0.05;
  p.size_factor = 5.0;
  p.target_range = 40.0;
  p.target_azimuth = 0.3;
  p.target_elevation = 0.2;
  p.near_field = false;
  const double at = multipath_sigma(p, 0.3, 0.2, MultipathKind::kPhase);
  CHECK(at > multipath_sigma(p, 0.5, 0.2, MultipathKind::kPhase));
  CHECK(at > multipath_sigma(p, 0.3, -0.1, MultipathKind::kPhase));
  // Continuity.
  CHECK(multipath_sigma(p, 0.3 + 1e-7, 0.2, MultipathKind::kPhase) == doctest::Approx(at));
}

TEST_CASE("multipath map export") {
  MultipathParams p;
  p.amplitude_phase = 0.05;
  std::ostringstream os;
  write_multipath_map(os, p, 30.0);
  const std::string s = os.str();
  CHECK(s.rfind("azimuth_deg,elevation_deg,sigma_phase_m\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') > 10);
  std::ostringstream bad;
  CHECK_THROWS(write_multipath_map(bad, p, 0.0));
}

TEST_CASE("rng streams are reproducible and independent") {
  RngStreams a(42), b(42), c(43);
  const double x = a.normal(RngStreams::Stream::kThermal);
  CHECK(x == b.normal(RngStreams::Stream::kThermal));
  CHECK(x != c.normal(RngStreams::Stream::kThermal));
  // Drawing from one stream does not shift another.
  RngStreams d(42), e(42);
  d.normal(RngStreams::Stream::kMultipath);
  CHECK(d.normal(RngStreams::Stream::kClock) == e.normal(RngStreams::Stream::kClock));
}

TEST_CASE("clock random walk variance grows linearly") {
  RngStreams rng(9);
  const int n = 20000;
  double sum2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double x = clock_random_walk(0.0, 4.0, 1.0, rng);
    sum2 += x * x;
  }
  CHECK(sum2 / n == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("klobuchar delay is positive and bounded") {
  const auto k = default_klobuchar();
  const Vec3 rx(constants::kEarthRadius + 400e3, 0, 0);
  const double zen = klobuchar_delay(rx, Vec3(1, 0, 0), 50'400.0, k);
  const double low = klobuchar_delay(rx, Vec3(0.2, 1, 0).normalized(), 50'400.0, k);
  CHECK(zen > 0.0);
  CHECK(zen < 30.0);
  CHECK(low > zen);
  CHECK(klobuchar_delay(rx, Vec3(-1, 0.1, 0).normalized(), 50'400.0, k) > 0.0);
}

TEST_CASE("ROE error calibration") {
  const double a = 26'560e3;
  RoeVector pattern{10.0, 1.0, -2.0, 0.5, 1.5, -0.7};
  const RoeError e = calibrate_roe(pattern, a, 1.5);
  CHECK(e.roe[0] == 0.0);
  CHECK(roe_rms(e.roe, a) == doctest::Approx(1.5).epsilon(1e-6));

  RngStreams rng(4);
  const RoeError r = random_roe_error(rng, a, 1.5);
  CHECK(roe_rms(r.roe, a) == doctest::Approx(1.5).epsilon(1e-6));

  KeplerElements el{a, 0.0, 55.0 * constants::kDeg, 0.3, 0.0, 1.0, 0.0};
  const Vec3 truth = orbit::kepler_to_state(el, 100.0).position;
  const Vec3 broadcast = inject_roe_error(el, r, 100.0);
  CHECK((broadcast - truth).norm() < 10.0);
  CHECK((broadcast - truth).norm() > 0.0);
}
