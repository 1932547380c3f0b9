#include "cdgps/scenario.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

using namespace cdgps;
using namespace cdgps::sim;

namespace {

double along_track(const TruthEpoch& e) {
  const Mat3 rtn = orbit::rtn_frame(e.deputy);
  return (rtn * (e.chief.position - e.deputy.position)).y();
}

ScenarioConfig quiet_leo() {
  ScenarioConfig c = ScenarioConfig::leo_preset();
  c.impulses.clear();
  c.unmodeled_accel_chief.setZero();
  c.unmodeled_accel_deputy.setZero();
  c.impulse_sigma = 0.0;
  return c;
}

}  // namespace

TEST_CASE("presets validate") {
  CHECK_NOTHROW(ScenarioConfig::leo_preset().validate());
  CHECK_NOTHROW(ScenarioConfig::geo_preset().validate());
  const auto leo = ScenarioConfig::leo_preset();
  CHECK(leo.target.a == doctest::Approx(constants::kEarthRadius + 370e3));
  CHECK(leo.target.i == doctest::Approx(51.6 * constants::kDeg));
  CHECK(leo.separation == 1000.0);
  CHECK(leo.gps_period == 30.0);
  CHECK(leo.external_period == 10.0);
  CHECK(leo.external_enable_time == 1800.0);
  const auto geo = ScenarioConfig::geo_preset();
  CHECK(geo.tracking_threshold == 15.0);
  CHECK(geo.lobe == LobeMode::kSidelobe);
}

TEST_CASE("config parsing") {
  const auto c = parse_config(R"({"kind": "geo", "seed": 9, "coupling": "none"})");
  CHECK(c.kind == ScenarioKind::kGeo);
  CHECK(c.seed == 9);
  CHECK(c.coupling == CouplingMode::kNone);
  CHECK_THROWS_AS(parse_config(R"({"kind": "leo", "bogus": 1, "noise": {"zap": 2}})"), ConfigError);
  try {
    parse_config(R"({"kind": "leo", "bogus": 1, "noise": {"zap": 2}})");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CHECK(what.find("bogus") != std::string::npos);
    CHECK(what.find("zap") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config(R"({"kind": "leo", "gps_period_s": -1})"), ConfigError);
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
  CHECK_THROWS_AS(parse_coupling("tight"), ConfigError);
}

TEST_CASE("resolved config round trip") {
  for (const auto& preset : {ScenarioConfig::leo_preset(), ScenarioConfig::geo_preset()}) {
    const std::string text = config_to_json(preset);
    CHECK(config_to_json(parse_config(text)) == text);
  }
}

TEST_CASE("differencing matrix and DD transform") {
  const MatX d = differencing_matrix(4, 2);
  CHECK(d.rows() == 3);
  CHECK(d.cols() == 4);
  CHECK((d * VecX::Ones(4)).norm() == doctest::Approx(0.0));
  for (int i = 0; i < 3; ++i) CHECK(d(i, 2) == -1.0);

  VecX f(3);
  f << 5.2, 1.1, -3.0;
  const MatX q = MatX::Identity(3, 3) * 0.01;
  const auto dd = sd_to_dd(f, q, 2);
  CHECK(dd.size() == 2);
  CHECK(dd.floats(0) == doctest::Approx(8.2));
  CHECK(dd.covariance(0, 0) == doctest::Approx(0.02));
  CHECK(dd.covariance(0, 1) == doctest::Approx(0.01));
  CHECK_THROWS_AS(sd_to_dd(VecX::Ones(1), MatX::Identity(1, 1), 0), InsufficientChannelsError);
}

TEST_CASE("co-orbital truth keeps its separation") {
  ScenarioConfig c = quiet_leo();
  c.duration = std::round(orbit::orbital_period(c.target.a) / c.truth_step) * c.truth_step;
  errors::RngStreams rng(1);
  const Truth t = generate_truth(c, rng);
  REQUIRE(t.epochs.size() > 10);
  for (const auto& e : t.epochs) {
    const double sep = (e.chief.position - e.deputy.position).norm();
    CHECK(sep == doctest::Approx(1000.0).epsilon(0.01));
  }
  CHECK(t.epochs[1].time - t.epochs[0].time == doctest::Approx(10.0));
}

TEST_CASE("along-track impulse drift matches the Gauss prediction") {
  ScenarioConfig c = quiet_leo();
  const double dv = 0.01;
  const double period = orbit::orbital_period(c.target.a);
  c.impulses.push_back({100.0, Vec3(0, dv, 0)});
  c.duration = 100.0 + std::round(3.0 * period / c.truth_step) * c.truth_step;
  errors::RngStreams rng(1);
  const Truth t = generate_truth(c, rng);
  // Along-track drift per orbit 3 pi da with da = 2 dv / n.
  const double n = 2.0 * constants::kPi / period;
  const double expected = 6.0 * constants::kPi * dv / n;
  auto at = [&](double time) {
    const auto k = static_cast<std::size_t>(std::llround(time / c.truth_step));
    return along_track(t.epochs.at(k));
  };
  const double t1 = 100.0 + std::round(period / c.truth_step) * c.truth_step;
  const double t2 = t1 + std::round(period / c.truth_step) * c.truth_step;
  CHECK(std::abs(at(t2) - at(t1)) == doctest::Approx(expected).epsilon(0.05));
}

TEST_CASE("GEO observations respect the threshold and sidelobe cone") {
  ScenarioConfig c = ScenarioConfig::geo_preset();
  c.duration = 7200.0;
  errors::RngStreams rng(3);
  const Truth t = generate_truth(c, rng);
  const auto epochs = synthesize_measurements(t, c, rng);
  int seen = 0;
  for (const auto& e : epochs) {
    for (const auto& [prn, cn0] : e.c_n0) {
      CHECK(cn0 >= 15.0);
      CHECK(e.off_boresight.at(prn) <= 60.0 * constants::kDeg + 1e-12);
      ++seen;
    }
  }
  CHECK(seen > 0);
}

TEST_CASE("LEO tracks are short") {
  ScenarioConfig c = ScenarioConfig::leo_preset();
  errors::RngStreams rng(2);
  const Truth t = generate_truth(c, rng);
  const auto epochs = synthesize_measurements(t, c, rng);
  const auto len = track_lengths(epochs, c.gps_period);
  REQUIRE(!len.empty());
  const double mean = std::accumulate(len.begin(), len.end(), 0.0) / len.size();
  CHECK(mean < orbit::orbital_period(c.target.a) / 3.0);
}

TEST_CASE("error-free synthesis starts the filter on the truth") {
  ScenarioConfig c = quiet_leo();
  c.duration = 1200.0;
  c.initial_error_position = 0.0;
  c.initial_error_velocity = 0.0;
  c.noise.thermal = false;
  c.noise.multipath_enabled = false;
  c.noise.clocks = false;
  c.noise.ionosphere = false;
  c.noise.ephemeris = false;
  c.coupling = CouplingMode::kNone;
  const RunReport r = run_scenario(c);
  REQUIRE(!r.rows.empty());
  for (const auto& row : r.rows) CHECK(row.pos_err_rtn.norm() < 0.05);
}

TEST_CASE("identical seeds give identical reports") {
  ScenarioConfig c = ScenarioConfig::leo_preset();
  c.duration = 2400.0;
  c.seed = 5;
  auto render = [&] {
    const RunReport r = run_scenario(c);
    std::ostringstream a, b;
    write_csv(a, r);
    write_json(b, r);
    return a.str() + b.str();
  };
  const std::string first = render();
  CHECK(first == render());
  c.seed = 6;
  CHECK(first != render());
}
