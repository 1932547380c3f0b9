#include "cdgps/measurements.hpp"

#include <doctest.h>

#include <Eigen/Geometry>

#include <random>

using namespace cdgps;
using namespace cdgps::meas;

namespace {

constexpr double kLam = constants::kL1Wavelength;

CarrierPhaseObs obs(int gps, int rx, double phase, double pr) {
  CarrierPhaseObs o;
  o.gps_id = gps;
  o.receiver_id = rx;
  o.phase = phase;
  o.pseudorange = pr;
  return o;
}

}  // namespace

TEST_CASE("wrap angle range") {
  CHECK(wrap_angle(3.0 * constants::kPi) == doctest::Approx(constants::kPi));
  CHECK(wrap_angle(-constants::kPi) == doctest::Approx(constants::kPi));
  CHECK(wrap_angle(0.25) == doctest::Approx(0.25));
}

TEST_CASE("undifferenced phase adds components in meters") {
  CHECK(undifferenced_phase(kLam * 10.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0, kLam) ==
        doctest::Approx(13.0));
  CHECK(undifferenced_phase(0.0, 0.0, 0.0, kLam, kLam, 0.0, 0.0, kLam) == doctest::Approx(0.0));
}

TEST_CASE("graphic removes the ionosphere") {
  const double rho = 2.2e7, iono = 7.3, n = 1234.0;
  const double pr = rho + iono;
  const double ph = undifferenced_phase(rho, n, -iono, 0.0, 0.0, 0.0, 0.0, kLam);
  const double g = graphic(pr, ph, kLam);
  CHECK(g == doctest::Approx(rho + 0.5 * kLam * n).epsilon(1e-15));
}

TEST_CASE("pairing errors") {
  CHECK_THROWS_AS(single_difference(obs(1, 0, 0, 0), obs(2, 1, 0, 0)), PairingError);
  const auto a = single_difference(obs(1, 0, 5, 7), obs(1, 1, 2, 3));
  CHECK(a.phase == doctest::Approx(3.0));
  CHECK(a.pseudorange == doctest::Approx(4.0));
  auto b = single_difference(obs(2, 0, 1, 1), obs(2, 1, 1, 1));
  b.receiver_b = 2;
  CHECK_THROWS_AS(double_difference(a, b), PairingError);
}

TEST_CASE("DDCP geometry row needs unit vectors") {
  const Vec3 p(1, 0, 0), q(0, 1, 0);
  CHECK((ddcp_geometry_row(p, q) - Vec3(1, -1, 0)).norm() == doctest::Approx(0.0));
  CHECK_THROWS_AS(ddcp_geometry_row(Vec3(2, 0, 0), q), NormalizationError);
}

TEST_CASE("range and bearing models") {
  SensorBiases b;
  CHECK(range_model(Vec3(3, 4, 0), b) == doctest::Approx(5.0));
  b.range_bias = 0.05;
  CHECK(range_model(Vec3(3, 4, 0), b) == doctest::Approx(5.05));
  CHECK_THROWS_AS(range_model(Vec3::Zero(), b), SingularGeometryError);

  const BearingObs on_axis = bearing_model(Vec3(0, 0, 100), {});
  CHECK(on_axis.azimuth == doctest::Approx(0.0));
  CHECK(on_axis.elevation == doctest::Approx(0.0));
  const BearingObs side = bearing_model(Vec3(100, 0, 100), {});
  CHECK(side.elevation == doctest::Approx(constants::kPi / 4));
  CHECK_THROWS_AS(bearing_model(Vec3(0, 5, 0), {}), SingularGeometryError);

  // Odd symmetry in y.
  const BearingObs up = bearing_model(Vec3(10, 30, 100), {});
  const BearingObs down = bearing_model(Vec3(10, -30, 100), {});
  CHECK(up.azimuth == doctest::Approx(-down.azimuth));
  CHECK(up.elevation == doctest::Approx(down.elevation));
}

TEST_CASE("sensor Jacobian matches central differences") {
  std::mt19937_64 g(21);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int k = 0; k < 20; ++k) {
    const Vec3 p(u(g), u(g), 60.0 + u(g) + 50.0);
    const Mat3 h = sensor_jacobian(p);
    for (int j = 0; j < 3; ++j) {
      Vec3 dp = Vec3::Zero();
      dp(j) = 1e-4;
      const BearingObs bp = bearing_model(p + dp, {}), bm = bearing_model(p - dp, {});
      CHECK(h(0, j) == doctest::Approx((range_model(p + dp, {}) - range_model(p - dp, {})) / 2e-4).epsilon(1e-6));
      CHECK(h(1, j) == doctest::Approx((bp.azimuth - bm.azimuth) / 2e-4).epsilon(1e-5));
      CHECK(h(2, j) == doctest::Approx((bp.elevation - bm.elevation) / 2e-4).epsilon(1e-5));
    }
  }
}

TEST_CASE("frame transform checks the rotation") {
  const Mat3 r = Eigen::AngleAxisd(0.3, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  CHECK(is_rotation(r));
  const Mat3 h = sensor_jacobian(Vec3(1, 2, 30));
  CHECK((transform_jacobian(h, r) - h * r).norm() == doctest::Approx(0.0));
  Mat3 bad = r;
  bad(0, 0) += 1e-3;
  CHECK_THROWS_AS(transform_jacobian(h, bad), FrameError);
  const auto j = eci_jacobians(Vec3(1, 2, 30), r);
  CHECK((j.chief + j.deputy).norm() == doctest::Approx(0.0));
}

TEST_CASE("epoch validation") {
  MeasurementEpoch e;
  e.time = 30.0;
  e.attitude_time = 30.0;
  e.range_obs = 100.0;
  CHECK_NOTHROW(e.validate());
  e.attitude_time = 29.0;
  CHECK_THROWS_AS(e.validate(), TimeTagError);
  e.attitude_time = 30.0;
  e.sdcp.push_back({5, 0.0});
  e.gps_positions.push_back(Vec3::Zero());
  e.gps_elevations.push_back(0.0);
  e.ddcp_reference = 7;
  CHECK_THROWS_AS(e.validate(), PairingError);
  e.ddcp_reference = 5;
  CHECK_NOTHROW(e.validate());
}

TEST_CASE("differencing cancels receiver and transmitter terms") {
  const double n[2][2] = {{100, -40}, {57, 12}};
  const double clk_rx[2] = {31.4, -12.7}, clk_tx[2] = {3.3, -8.1};
  const double rng[2][2] = {{2.1e7, 2.3e7}, {2.1e7 + 50, 2.3e7 - 20}};
  CarrierPhaseObs o[2][2];
  for (int r = 0; r < 2; ++r)
    for (int s = 0; s < 2; ++s)
      o[r][s] = obs(s + 1, r,
                    undifferenced_phase(rng[r][s], n[r][s], 0.0, clk_rx[r], clk_tx[s], 0.0, 0.0, kLam),
                    0.0);
  const auto sd0 = single_difference(o[0][0], o[1][0]);
  const auto sd1 = single_difference(o[0][1], o[1][1]);
  const auto dd = double_difference(sd0, sd1);
  const double expected = ((rng[0][0] - rng[1][0]) - (rng[0][1] - rng[1][1])) / kLam +
                          (n[0][0] - n[1][0]) - (n[0][1] - n[1][1]);
  // Inputs are ~1e8 cycles, so compare absolutely.
  CHECK(std::abs(dd.phase - expected) < 1e-6);
}
