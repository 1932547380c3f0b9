#include "cdgps/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace cdgps::sim {

using constants::kL1Wavelength;
using errors::RngStreams;

namespace {

// Epoch times are handled on an integer millisecond grid.
long long ms(double t) { return std::llround(t * 1000.0); }
bool on_grid(double t, double period) { return ms(period) > 0 && ms(t) % ms(period) == 0; }

// Sensor frame: boresight (z) along the chief's +T axis, x = N, y = R.
Mat3 sensor_attitude(const OrbitState& chief) {
  const Mat3 rtn = orbit::rtn_frame(chief);
  Mat3 m;
  m.row(0) = rtn.row(2);
  m.row(1) = rtn.row(0);
  m.row(2) = rtn.row(1);
  return m;
}

double antenna_elevation(const ScenarioConfig& cfg, const Vec3& rx, const Vec3& unit_los) {
  const double up = unit_los.dot(rx.normalized());
  const double s = cfg.boresight == AntennaBoresight::kZenith ? up : -up;
  return std::asin(std::clamp(s, -1.0, 1.0));
}

}  // namespace

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& f, const std::string& why) {
    throw ConfigError(f + ": " + why);
  };
  if (!(target.a > constants::kEarthRadius)) fail("target.a", "must exceed the Earth radius");
  if (!(target.e >= 0.0 && target.e < 1.0)) fail("target.e", "must be in [0, 1)");
  if (!(separation > 0.0)) fail("separation", "must be > 0");
  if (!(truth_step > 0.0)) fail("truth_step", "must be > 0");
  for (const auto& [name, v] : {std::pair{"gps_period", gps_period},
                                std::pair{"external_period", external_period}}) {
    if (!(v > 0.0) || !on_grid(v, truth_step)) fail(name, "must be a positive multiple of truth_step");
  }
  if (!(effective_duration() > 0.0)) fail(full_length ? "full_duration" : "duration", "must be > 0");
  if (!on_grid(effective_duration(), truth_step)) fail("duration", "must be a multiple of truth_step");
  for (const auto& imp : impulses) {
    if (imp.time < 0.0 || !on_grid(imp.time, truth_step)) {
      fail("impulses", "time " + std::to_string(imp.time) + " is not on the truth grid");
    }
    if (!imp.dv_rtn.allFinite()) fail("impulses", "non-finite delta-v");
  }
  if (impulse_sigma < 0.0) fail("impulse_sigma", "must be >= 0");
  if (initial_error_position < 0.0) fail("initial_error_position", "must be >= 0");
  if (initial_error_velocity < 0.0) fail("initial_error_velocity", "must be >= 0");
  if (!(reference_range > 0.0)) fail("reference_range", "must be > 0");
  if (constellation.satellites.empty()) fail("constellation", "needs at least one satellite");
  if (noise.sigma_code < 0.0 || noise.sigma_phase < 0.0) fail("noise", "sigmas must be >= 0");
  if (noise.clock_walk < 0.0 || noise.gps_clock_sigma < 0.0 || noise.ephemeris_rms < 0.0) {
    fail("noise", "clock and ephemeris sigmas must be >= 0");
  }
  noise.multipath.validate();
  if (!(sensors.range_sigma > 0.0) || !(sensors.angle_sigma > 0.0)) {
    fail("sensors", "sigmas must be > 0");
  }
  if (!(kappa_p > 0.0 && kappa_p < 1.0)) fail("kappa_p", "must be in (0, 1)");
  if (!(kappa_d > 0.0)) fail("kappa_d", "must be > 0");
  if (search_step < 1) fail("search_step", "must be >= 1");
  filter.validate();
}

ScenarioConfig ScenarioConfig::leo_preset() {
  ScenarioConfig c;
  c.name = "leo_iss";
  c.kind = ScenarioKind::kLeo;
  c.target = {constants::kEarthRadius + 370e3, 1e-4, 51.6 * constants::kDeg,
              30.0 * constants::kDeg, 0.0, 0.0, 0.0};
  c.impulses = {{2400.0, {-0.227539118, -0.000103834, 0.0}},
                {5160.0, {-0.227539118, 0.000103834, 0.0}},
                {6600.0, {-0.042663585, -0.000019469, 0.0}},
                {9360.0, {-0.042663585, 0.000019469, 0.0}}};
  c.unmodeled_accel_chief = {2e-8, -1e-8, 5e-9};
  c.unmodeled_accel_deputy = {0.0, -2e-8, 0.0};
  c.duration = 11'040.0;
  c.full_duration = 28'800.0;
  c.noise.sigma_code = 0.20;
  c.noise.sigma_phase = 0.002;
  c.noise.multipath.amplitude_code = 5.0;
  c.noise.multipath.amplitude_phase = 0.050;
  c.noise.multipath.size_factor = 5.0;
  c.filter = nav::FilterTuning::leo();
  c.filter.tau_clock = nav::kInfinity;
  // 5 cycles per GPS update, expressed as a density.
  c.filter.proc_ambiguity = 5.0 / std::sqrt(c.gps_period);
  // Filter weights follow the near-field multipath amplitudes.
  c.filter.elevation_weight_code = c.noise.multipath.amplitude_code;
  c.filter.elevation_weight_phase = c.noise.multipath.amplitude_phase;
  return c;
}

ScenarioConfig ScenarioConfig::geo_preset() {
  ScenarioConfig c;
  c.name = "geo_sidelobe";
  c.kind = ScenarioKind::kGeo;
  c.target = {42'164e3, 0.0, 0.05 * constants::kDeg, 0.0, 0.0, 0.0, 0.0};
  c.impulses = {{3600.0, {-0.03983573, 0.019832199, 0.0}},
                {25'200.0, {-0.03983573, -0.019832199, 0.0}}};
  c.duration = 43'080.0;
  c.full_duration = 86'160.0;
  c.lobe = LobeMode::kSidelobe;
  c.exclude_mainlobe = true;
  c.boresight = AntennaBoresight::kNadir;
  c.reference_c_n0 = 16.45;
  c.reference_range = 80'000e3;
  c.tracking_threshold = 15.0;
  c.noise.sigma_code = 2.673;
  c.noise.sigma_phase = 0.021274;
  c.noise.multipath.amplitude_code = 1.0;
  c.noise.multipath.amplitude_phase = 0.010;
  c.noise.multipath.size_factor = 1.0;
  c.noise.ionosphere = false;
  c.filter = nav::FilterTuning::geo();
  c.filter.tau_clock = nav::kInfinity;
  c.filter.proc_ambiguity = 5.0 / std::sqrt(c.gps_period);
  return c;
}

std::string to_string(CouplingMode m) {
  switch (m) {
    case CouplingMode::kNone: return "none";
    case CouplingMode::kLoose: return "loose";
    case CouplingMode::kFull: return "full";
  }
  return "full";
}

CouplingMode parse_coupling(const std::string& s) {
  if (s == "none") return CouplingMode::kNone;
  if (s == "loose") return CouplingMode::kLoose;
  if (s == "full") return CouplingMode::kFull;
  throw ConfigError("coupling: expected none | loose | full, got '" + s + "'");
}

// ---- truth -------------------------------------------------------------------

Truth generate_truth(const ScenarioConfig& cfg, RngStreams& rng) {
  cfg.validate();
  Truth truth;
  KeplerElements chief_el = cfg.target;
  chief_el.mean_anomaly -= cfg.separation / cfg.target.a;
  OrbitState chief = orbit::kepler_to_state(chief_el, 0.0);
  OrbitState deputy = orbit::kepler_to_state(cfg.target, 0.0);
  double clk_c = 0.0, clk_d = 0.0;
  if (cfg.noise.clocks) {
    clk_c = rng.normal(RngStreams::Stream::kClock, 10.0);
    clk_d = rng.normal(RngStreams::Stream::kClock, 10.0);
  }

  std::vector<Impulse> schedule = cfg.impulses;
  std::stable_sort(schedule.begin(), schedule.end(),
                   [](const Impulse& a, const Impulse& b) { return a.time < b.time; });
  truth.executed_dv_rtn.assign(schedule.size(), Vec3::Zero());
  std::size_t next = 0;
  const long long steps = ms(cfg.effective_duration()) / ms(cfg.truth_step);
  const orbit::PropagationOptions opts{cfg.truth_step, true};
  bool warned = false;
  for (long long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * cfg.truth_step;
    while (next < schedule.size() && ms(schedule[next].time) <= ms(t)) {
      Vec3 dv = schedule[next].dv_rtn;
      for (int a = 0; a < 3; ++a) dv(a) += rng.normal(RngStreams::Stream::kManeuver, cfg.impulse_sigma);
      chief.velocity += orbit::rtn_frame(chief).transpose() * dv;
      truth.executed_dv_rtn[next] = dv;
      truth.events.push_back({t, "impulse", "chief delta-v applied"});
      ++next;
    }
    truth.epochs.push_back({t, chief, deputy, clk_c, clk_d});
    if (!warned && k < steps && (deputy.position - chief.position).norm() < 1.0) {
      truth.events.push_back({t, "warning", "separation below 1 m before the final epoch"});
      warned = true;
    }
    if (k == steps) break;
    chief = orbit::propagate(chief, cfg.truth_step, cfg.unmodeled_accel_chief, opts);
    deputy = orbit::propagate(deputy, cfg.truth_step, cfg.unmodeled_accel_deputy, opts);
    if (cfg.noise.clocks) {
      clk_c = errors::clock_random_walk(clk_c, cfg.truth_step, cfg.noise.clock_walk, rng);
      clk_d = errors::clock_random_walk(clk_d, cfg.truth_step, cfg.noise.clock_walk, rng);
    }
  }
  return truth;
}

// ---- measurements ------------------------------------------------------------

namespace {

struct ReceiverObs {
  double pseudorange = 0.0;
  double phase = 0.0;  // cycles
};

struct SatelliteErrors {
  double clock = 0.0;
  errors::RoeError roe;
};

}  // namespace

std::vector<SyntheticEpoch> synthesize_measurements(const Truth& truth,
                                                    const ScenarioConfig& cfg,
                                                    RngStreams& rng) {
  const auto& sats = cfg.constellation.satellites;
  std::map<int, SatelliteErrors> sat_err;
  for (const auto& sat : sats) {
    SatelliteErrors e;
    if (cfg.noise.clocks) e.clock = rng.normal(RngStreams::Stream::kGpsClock, cfg.noise.gps_clock_sigma);
    if (cfg.noise.ephemeris) e.roe = errors::random_roe_error(rng, sat.elements.a, cfg.noise.ephemeris_rms);
    sat_err[sat.prn] = e;
  }
  const auto klob = errors::default_klobuchar();
  const double lam = kL1Wavelength;
  std::map<int, std::int64_t> track[2];

  std::vector<SyntheticEpoch> out;
  for (const auto& te : truth.epochs) {
    const double t = te.time;
    const bool gps = on_grid(t, cfg.gps_period);
    const bool ext = t >= cfg.external_enable_time && on_grid(t, cfg.external_period);
    if (!gps && !ext) continue;

    SyntheticEpoch se;
    se.meas.time = t;
    se.meas.attitude = sensor_attitude(te.chief);
    se.meas.attitude_time = t;
    const Vec3 rel = te.deputy.position - te.chief.position;
    const Vec3 rho_sensor = se.meas.attitude * rel;

    if (gps) {
      errors::MultipathParams mp = cfg.noise.multipath;
      try {
        const BearingObs tgt = meas::bearing_model(rho_sensor, {});
        mp.target_azimuth = tgt.azimuth;
        mp.target_elevation = tgt.elevation;
        mp.target_range = rel.norm();
      } catch (const SingularGeometryError&) {
        mp.far_field = false;
      }
      double best_el = -10.0;
      for (const auto& sat : sats) {
        const Vec3 p = orbit::kepler_to_state(sat.elements, t).position;
        const Vec3* rx[2] = {&te.chief.position, &te.deputy.position};
        const double clk[2] = {te.clock_chief, te.clock_deputy};
        bool ok[2];
        double cn0_c = 0.0, boresight = 0.0;
        for (int r = 0; r < 2; ++r) {
          const Visibility vis =
              orbit::visibility(*rx[r], p, cfg.constellation, cfg.lobe, se.meas.attitude);
          const Vec3 u = (p - *rx[r]).normalized();
          const double range = (p - *rx[r]).norm();
          const double cn0 = cfg.reference_c_n0 + 20.0 * std::log10(cfg.reference_range / range);
          ok[r] = vis.visible && !(cfg.exclude_mainlobe && vis.in_mainlobe) &&
                  antenna_elevation(cfg, *rx[r], u) >= cfg.elevation_mask &&
                  cn0 >= cfg.tracking_threshold;
          if (r == 0) {
            cn0_c = cn0;
            boresight = vis.off_boresight;
          }
          if (!ok[r]) track[r].erase(sat.prn);
        }
        if (!ok[0] || !ok[1]) continue;

        ReceiverObs obs[2];
        for (int r = 0; r < 2; ++r) {
          const Vec3 d = p - *rx[r];
          const double range = d.norm();
          const Vec3 u = d / range;
          if (!track[r].count(sat.prn)) {
            const auto offset = static_cast<std::int64_t>(
                std::floor(rng.uniform(RngStreams::Stream::kAmbiguity, -100.0, 101.0)));
            track[r][sat.prn] = -static_cast<std::int64_t>(std::floor(range / lam)) + offset;
          }
          const double iono =
              cfg.noise.ionosphere
                  ? errors::klobuchar_delay(*rx[r], u, std::fmod(t, 86'400.0), klob)
                  : 0.0;
          double nc = 0.0, np = 0.0;
          if (cfg.noise.thermal) {
            nc = rng.normal(RngStreams::Stream::kThermal, cfg.noise.sigma_code);
            np = rng.normal(RngStreams::Stream::kThermal, cfg.noise.sigma_phase);
          }
          if (cfg.noise.multipath_enabled) {
            errors::MultipathParams m = mp;
            if (r == 1) m.far_field = false;
            const Visibility vis =
                orbit::visibility(*rx[r], p, cfg.constellation, cfg.lobe, se.meas.attitude);
            const double el = antenna_elevation(cfg, *rx[r], u);
            // Near field uses the elevation above the antenna plane, far
            // field the arrival direction in the sensor frame.
            double sc = 0.0, sp = 0.0;
            if (m.near_field) {
              sc += errors::near_field_multipath(m.amplitude_code, el);
              sp += errors::near_field_multipath(m.amplitude_phase, el);
            }
            if (m.far_field && m.target_range > 0.0) {
              const double daz = wrap_angle(vis.azimuth - m.target_azimuth);
              const double del = wrap_angle(vis.elevation - m.target_elevation);
              sc += errors::far_field_multipath(m.amplitude_code, m.size_factor, m.target_range, daz, del);
              sp += errors::far_field_multipath(m.amplitude_phase, m.size_factor, m.target_range, daz, del);
            }
            nc += rng.normal(RngStreams::Stream::kMultipath, sc);
            np += rng.normal(RngStreams::Stream::kMultipath, sp);
          }
          const double bp = sat_err[sat.prn].clock;
          obs[r].pseudorange = range + clk[r] - bp + iono + nc;
          obs[r].phase = meas::undifferenced_phase(range, static_cast<double>(track[r][sat.prn]),
                                                   -iono, clk[r], bp, 0.0, np, lam);
        }
        const Vec3 broadcast = cfg.noise.ephemeris
                                   ? errors::inject_roe_error(sat.elements, sat_err[sat.prn].roe, t)
                                   : p;
        se.meas.graphic.push_back(
            {sat.prn, Receiver::kChief, meas::graphic(obs[0].pseudorange, obs[0].phase, lam)});
        se.meas.graphic.push_back(
            {sat.prn, Receiver::kDeputy, meas::graphic(obs[1].pseudorange, obs[1].phase, lam)});
        se.meas.sdcp.push_back({sat.prn, obs[0].phase - obs[1].phase});
        se.meas.gps_positions.push_back(broadcast);
        const double el_local = std::asin(std::clamp(
            (p - te.chief.position).normalized().dot(te.chief.position.normalized()), -1.0, 1.0));
        se.meas.gps_elevations.push_back(el_local);
        if (el_local > best_el) {
          best_el = el_local;
          se.meas.ddcp_reference = sat.prn;
        }
        se.truth_sd[sat.prn] = track[0][sat.prn] - track[1][sat.prn];
        se.c_n0[sat.prn] = cn0_c;
        se.off_boresight[sat.prn] = boresight;
      }
      se.gps = se.meas.has_gps();
    }

    if (ext) {
      const SensorBiases b{cfg.sensors.range_bias, cfg.sensors.angle_bias, cfg.sensors.angle_bias};
      try {
        const double r = meas::range_model(rho_sensor, b);
        const BearingObs ang = meas::bearing_model(rho_sensor, b);
        se.meas.range_obs = r + rng.normal(RngStreams::Stream::kExternal, cfg.sensors.range_sigma);
        BearingObs noisy;
        noisy.azimuth = ang.azimuth + rng.normal(RngStreams::Stream::kExternal, cfg.sensors.angle_sigma);
        noisy.elevation =
            wrap_angle(ang.elevation + rng.normal(RngStreams::Stream::kExternal, cfg.sensors.angle_sigma));
        se.meas.bearing_obs = noisy;
      } catch (const SingularGeometryError&) {
        // No external observation at a degenerate geometry.
      }
    }
    if (!se.gps && !se.meas.has_external()) continue;
    out.push_back(std::move(se));
  }
  return out;
}

std::vector<double> track_lengths(const std::vector<SyntheticEpoch>& epochs, double gps_period) {
  std::map<int, double> start, last;
  std::vector<double> lengths;
  for (const auto& e : epochs) {
    if (!e.gps) continue;
    for (auto it = last.begin(); it != last.end();) {
      if (!e.truth_sd.count(it->first) && e.meas.time - it->second > gps_period * 1.5) {
        lengths.push_back(it->second - start[it->first] + gps_period);
        start.erase(it->first);
        it = last.erase(it);
      } else {
        ++it;
      }
    }
    for (const auto& [prn, n] : e.truth_sd) {
      if (!last.count(prn)) start[prn] = e.meas.time;
      last[prn] = e.meas.time;
    }
  }
  for (const auto& [prn, t] : last) lengths.push_back(t - start[prn] + gps_period);
  return lengths;
}

// ---- differencing ------------------------------------------------------------

MatX differencing_matrix(int k, int reference) {
  if (k < 2) throw InsufficientChannelsError("double differencing needs at least 2 channels");
  if (reference < 0 || reference >= k) throw Error("differencing reference out of range");
  MatX d = MatX::Zero(k - 1, k);
  int row = 0;
  for (int i = 0; i < k; ++i) {
    if (i == reference) continue;
    d(row, i) = 1.0;
    d(row, reference) = -1.0;
    ++row;
  }
  return d;
}

iar::AmbiguityDistribution sd_to_dd(const VecX& sd_floats, const MatX& sd_covariance,
                                    int reference) {
  const int k = static_cast<int>(sd_floats.size());
  const MatX d = differencing_matrix(k, reference);
  MatX cov = d * sd_covariance * d.transpose();
  cov = 0.5 * (cov + cov.transpose());
  return iar::make_distribution(d * sd_floats, cov);
}

// ---- run ---------------------------------------------------------------------

namespace {

struct RunContext {
  const ScenarioConfig& cfg;
  RunReport& report;
  nav::FilterState& s;
  double last_prob = 0.0;
};

Mat3 relative_rtn_cov(const nav::FilterState& s, const Mat3& rtn, int pos_offset) {
  MatX j = MatX::Zero(3, nav::kStateSize);
  j.block<3, 3>(0, pos_offset) = -Mat3::Identity();
  j.block<3, 3>(0, pos_offset + 10) = Mat3::Identity();
  const Mat3 c = j * s.P * j.transpose();
  return rtn * c * rtn.transpose();
}

// Full-coupling constraint context for the DD rows of `channels` (unfixed
// first, then fixed), referenced to `ref`.
iar::ConstraintContext make_context(const nav::FilterState& s, const MeasurementEpoch& e,
                                    const ScenarioConfig& cfg, const std::vector<int>& unfixed,
                                    const std::vector<int>& fixed_nonref, int ref) {
  const double lam = kL1Wavelength;
  std::map<int, std::size_t> pos;
  for (std::size_t k = 0; k < e.sdcp.size(); ++k) pos[e.sdcp[k].gps_id] = k;
  const Vec3 rc = s.x.segment<3>(nav::idx::kChiefPos);
  const Vec3 rd = s.x.segment<3>(nav::idx::kDeputyPos);
  const Vec3 b = rd - rc;
  auto los = [&](int ch) { return (e.gps_positions[pos.at(s.channel_prn[ch])] - rc).normalized(); };
  auto sd_range = [&](int ch) {
    const Vec3& p = e.gps_positions[pos.at(s.channel_prn[ch])];
    return (p - rc).norm() - (p - rd).norm();
  };
  auto sd_phase = [&](int ch) { return e.sdcp[pos.at(s.channel_prn[ch])].value; };

  std::vector<int> rows = unfixed;
  rows.insert(rows.end(), fixed_nonref.begin(), fixed_nonref.end());
  iar::ConstraintContext ctx;
  const auto n = static_cast<Eigen::Index>(rows.size());
  ctx.geometry = MatX(n, 3);
  ctx.ddcp_phases = VecX(n);
  ctx.known_ambiguities = IntVec::Zero(n);
  const Vec3 u_ref = los(ref);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int ch = rows[i];
    const Vec3 g = meas::ddcp_geometry_row(los(ch), u_ref);
    ctx.geometry.row(i) = g.transpose();
    const double dd_exact = sd_range(ch) - sd_range(ref);
    ctx.ddcp_phases(i) = sd_phase(ch) - sd_phase(ref) - (dd_exact - g.dot(b)) / lam;
    if (i >= static_cast<Eigen::Index>(unfixed.size())) {
      ctx.known_ambiguities(i) =
          std::llround(s.x(nav::idx::kAmbSd + ch) - s.x(nav::idx::kAmbSd + ref));
    }
  }
  for (std::size_t j = 0; j < unfixed.size(); ++j) ctx.search_rows.push_back(static_cast<int>(j));
  ctx.dcm_eci_to_sensor = e.attitude;
  ctx.biases = s.biases();
  ctx.estimated_range = (e.attitude * b).norm();
  if (e.range_obs) {
    ctx.range = *e.range_obs;
    ctx.sigma_range = cfg.sensors.range_sigma;
    ctx.range_enabled = true;
  }
  if (e.bearing_obs) {
    ctx.azimuth = e.bearing_obs->azimuth;
    ctx.elevation = e.bearing_obs->elevation;
    ctx.sigma_azimuth = cfg.sensors.angle_sigma;
    ctx.sigma_elevation = cfg.sensors.angle_sigma;
    ctx.azimuth_enabled = true;
    ctx.elevation_enabled = true;
  }
  return ctx;
}

void attempt_iar(RunContext& rc, const SyntheticEpoch& se) {
  nav::FilterState& s = rc.s;
  const MeasurementEpoch& e = se.meas;
  std::map<int, double> elevation;
  for (std::size_t k = 0; k < e.sdcp.size(); ++k) elevation[e.sdcp[k].gps_id] = e.gps_elevations[k];

  std::vector<int> active;
  for (int c = 0; c < nav::kChannels; ++c) {
    if (s.channel_prn[c] >= 0 && elevation.count(s.channel_prn[c])) active.push_back(c);
  }
  if (active.size() < 2) return;
  int ref = -1;
  for (const bool want_fixed : {true, false}) {
    for (const int c : active) {
      if (want_fixed && !s.fixed[c]) continue;
      if (ref < 0 || elevation[s.channel_prn[c]] > elevation[s.channel_prn[ref]]) ref = c;
    }
    if (ref >= 0) break;
  }
  std::vector<int> unfixed, fixed_nonref;
  for (const int c : active) {
    if (c == ref) continue;
    (s.fixed[c] ? fixed_nonref : unfixed).push_back(c);
  }
  if (unfixed.empty()) return;

  // SD sub-vector: unfixed channels then the reference.
  std::vector<int> sub = unfixed;
  sub.push_back(ref);
  const auto k = static_cast<Eigen::Index>(sub.size());
  VecX f(k);
  MatX cov(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    f(i) = s.x(nav::idx::kAmbSd + sub[i]);
    for (Eigen::Index j = 0; j < k; ++j) cov(i, j) = s.P(nav::idx::kAmbSd + sub[i], nav::idx::kAmbSd + sub[j]);
  }
  const int ref_pos = static_cast<int>(k - 1);
  const MatX d = differencing_matrix(static_cast<int>(k), ref_pos);
  const iar::AmbiguityDistribution dist = iar::decorrelate(sd_to_dd(f, cov, ref_pos));

  iar::IntegerSearchResult result;
  std::string search = "classical";
  if (rc.cfg.coupling == CouplingMode::kFull && e.has_external()) {
    try {
      const auto ctx = make_context(s, e, rc.cfg, unfixed, fixed_nonref, ref);
      result = iar::constrained_search(dist, ctx, rc.cfg.search_step);
      search = "constrained";
    } catch (const SingularGeometryError& err) {
      rc.report.events.push_back({e.time, "fallback", err.what()});
    }
  }
  if (search == "classical") result = iar::classical_ils_search(dist);

  const iar::PartialFix pf = iar::partial_resolve(dist, result, rc.cfg.kappa_p, rc.cfg.kappa_d);
  rc.last_prob = pf.fixed_indices.empty() ? pf.last_success_prob : pf.success_prob;
  if (pf.fixed_indices.empty()) return;

  // Rows in state space: current = Z^T D x_sub.
  const MatX zt = dist.z_matrix.cast<double>().transpose();
  const MatX zd = zt * d;
  IntVec truth_dd(k - 1);
  for (Eigen::Index i = 0; i + 1 < k; ++i) {
    truth_dd(i) = se.truth_sd.at(s.channel_prn[sub[i]]) - se.truth_sd.at(s.channel_prn[ref]);
  }
  const IntVec truth_cur = dist.to_current(truth_dd);

  std::vector<Eigen::RowVectorXd> rows;
  FixEvent ev;
  ev.time = e.time;
  for (const int c : sub) ev.prns.push_back(s.channel_prn[c]);
  ev.success_prob = pf.success_prob;
  ev.search = search;
  for (std::size_t j = 0; j < pf.fixed_indices.size(); ++j) {
    const int zi = pf.fixed_indices[j];
    Eigen::RowVectorXd h = Eigen::RowVectorXd::Zero(nav::kStateSize);
    for (Eigen::Index i = 0; i < k; ++i) h(nav::idx::kAmbSd + sub[i]) = zd(zi, i);
    const double var = (h * s.P * h.transpose())(0, 0);
    if (var < 1e-6) continue;  // already held from an earlier fix
    rows.push_back(h);
    ev.indices.push_back(zi);
    ev.values.push_back(pf.fixed_values(static_cast<Eigen::Index>(j)));
    ev.truth.push_back(truth_cur(zi));
    if (ev.values.back() != ev.truth.back()) ev.correct = false;
  }
  if (rows.empty()) return;

  if (s.fixed_channels() == 0) {
    // Integer datum for the otherwise weakly observable common SD offset.
    MatX h = MatX::Zero(1, nav::kStateSize);
    h(0, nav::idx::kAmbSd + ref) = 1.0;
    nav::constrain(s, h, VecX::Constant(1, std::round(s.x(nav::idx::kAmbSd + ref))), 1e-8);
  }
  MatX h(static_cast<Eigen::Index>(rows.size()), nav::kStateSize);
  VecX z(h.rows());
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    h.row(i) = rows[i];
    z(i) = static_cast<double>(ev.values[i]);
  }
  nav::constrain(s, h, z, 1e-8);

  std::vector<int> chans;
  std::vector<std::int64_t> vals;
  for (const int c : sub) {
    const int i = nav::idx::kAmbSd + c;
    if (!s.fixed[c] && s.P(i, i) < 1e-6) {
      chans.push_back(c);
      vals.push_back(std::llround(s.x(i)));
    }
  }
  if (!chans.empty()) nav::apply_fixes(s, chans, vals);
  if (rc.report.time_first_fix < 0.0) rc.report.time_first_fix = e.time;
  rc.report.fixes.push_back(std::move(ev));
}

}  // namespace

RunReport run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  RunReport report;
  report.seed = cfg.seed;
  report.config_json = config_to_json(cfg);

  RngStreams rng(cfg.seed);
  const Truth truth = generate_truth(cfg, rng);
  const std::vector<SyntheticEpoch> epochs = synthesize_measurements(truth, cfg, rng);
  report.events = truth.events;
  const auto lengths = track_lengths(epochs, cfg.gps_period);
  if (!lengths.empty()) {
    double sum = 0.0;
    for (const double l : lengths) sum += l;
    report.mean_track_length = sum / static_cast<double>(lengths.size());
  }

  const auto noisy = [&](const OrbitState& st) {
    OrbitState o = st;
    for (int a = 0; a < 3; ++a) {
      o.position(a) += rng.normal(RngStreams::Stream::kInitialError, cfg.initial_error_position);
      o.velocity(a) += rng.normal(RngStreams::Stream::kInitialError, cfg.initial_error_velocity);
    }
    return o;
  };
  const TruthEpoch& t0 = truth.epochs.front();
  const SensorBiases biases{cfg.sensors.range_bias, cfg.sensors.angle_bias, cfg.sensors.angle_bias};
  nav::FilterState s =
      nav::FilterState::initialize(noisy(t0.chief), noisy(t0.deputy), biases, cfg.filter);

  std::vector<Impulse> schedule = cfg.impulses;
  std::stable_sort(schedule.begin(), schedule.end(),
                   [](const Impulse& a, const Impulse& b) { return a.time < b.time; });
  std::size_t next_impulse = 0;
  const bool use_external = cfg.coupling != CouplingMode::kNone;
  RunContext rc{cfg, report, s};
  std::vector<nav::EpochRecord> history;
  const long long step_ms = ms(cfg.truth_step);

  for (const auto& se : epochs) {
    const double t = se.meas.time;
    EpochRow row;
    row.time = t;
    bool skipped = false;
    try {
      while (next_impulse < schedule.size() && ms(schedule[next_impulse].time) <= ms(t)) {
        const double ti = schedule[next_impulse].time;
        if (ti > s.time) nav::time_update(s, cfg.filter, ti - s.time);
        const Mat3 rtn = orbit::rtn_frame(s.spacecraft(Receiver::kChief));
        nav::apply_impulse(s, Receiver::kChief, rtn.transpose() * schedule[next_impulse].dv_rtn,
                           cfg.impulse_sigma);
        row.pipeline += 'V';
        ++next_impulse;
      }
      if (t > s.time) {
        nav::time_update(s, cfg.filter, t - s.time);
        row.pipeline += 'T';
      }
    } catch (const Error& err) {
      report.events.push_back({t, "error", err.what()});
      skipped = true;
    }
    if (!skipped) {
      try {
        if (se.gps || on_grid(t, cfg.gps_period)) nav::sync_channels(s, se.meas, cfg.filter);
        MeasurementEpoch m = se.meas;
        if (!se.gps) {
          m.graphic.clear();
          m.sdcp.clear();
        }
        const nav::ResidualReport res = nav::measurement_update(s, m, cfg.filter, use_external);
        row.rejected_rows = res.rejected;
        row.pipeline += 'M';
      } catch (const Error& err) {
        report.events.push_back({t, "error", err.what()});
        skipped = true;
      }
    }
    if (!skipped && se.gps && t >= cfg.iar_start) {
      try {
        attempt_iar(rc, se);
        row.pipeline += 'I';
      } catch (const Error& err) {
        report.events.push_back({t, "error", err.what()});
        skipped = true;
      }
    }
    if (skipped) ++report.skipped_epochs;
    ++report.epochs;

    const auto ti = static_cast<std::size_t>(ms(t) / step_ms);
    const TruthEpoch& te = truth.epochs.at(ti);
    const Mat3 rtn = orbit::rtn_frame(te.deputy);
    nav::EpochRecord rec;
    rec.time = t;
    rec.est_rel_pos = s.relative_position();
    rec.true_rel_pos = te.deputy.position - te.chief.position;
    rec.est_rel_vel = s.relative_velocity();
    rec.true_rel_vel = te.deputy.velocity - te.chief.velocity;
    rec.target_rtn = rtn;
    rec.fixed_channels = s.fixed_channels();
    rec.active_channels = s.active_channels();
    history.push_back(rec);

    row.pos_err_rtn = rtn * (rec.est_rel_pos - rec.true_rel_pos);
    row.vel_err_rtn = rtn * (rec.est_rel_vel - rec.true_rel_vel);
    row.pos_sigma_rtn = relative_rtn_cov(s, rtn, nav::idx::kChiefPos).diagonal().cwiseMax(0.0).cwiseSqrt();
    row.vel_sigma_rtn = relative_rtn_cov(s, rtn, nav::idx::kChiefVel).diagonal().cwiseMax(0.0).cwiseSqrt();
    row.active_channels = rec.active_channels;
    row.fixed_channels = rec.fixed_channels;
    row.fixed_fraction = rec.active_channels > 0
                             ? static_cast<double>(rec.fixed_channels) / rec.active_channels
                             : 0.0;
    row.success_prob = rc.last_prob;
    report.rows.push_back(std::move(row));
  }

  std::vector<bool> correct;
  for (const auto& f : report.fixes) correct.push_back(f.correct);
  report.metrics = nav::navigation_metrics(history, correct, cfg.iar_start);
  report.degraded = report.epochs > 0 && report.skipped_epochs * 10 >= report.epochs;
  return report;
}

}  // namespace cdgps::sim
