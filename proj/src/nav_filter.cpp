#include "cdgps/nav_filter.hpp"

#include "cdgps/iar.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

namespace cdgps::nav {

using constants::kL1Wavelength;

FilterTuning FilterTuning::leo() { return {}; }

FilterTuning FilterTuning::geo() {
  FilterTuning t;
  t.sigma_code = 2.65;
  t.sigma_phase = 0.020;
  return t;
}

void FilterTuning::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ConfigError(std::string("filter tuning: ") + name + " must be > 0");
  };
  positive(init_position, "init_position");
  positive(init_velocity, "init_velocity");
  positive(init_accel.minCoeff(), "init_accel");
  positive(init_clock, "init_clock");
  positive(init_ambiguity, "init_ambiguity");
  positive(init_range_bias, "init_range_bias");
  positive(init_angle_bias, "init_angle_bias");
  positive(proc_position, "proc_position");
  positive(proc_velocity, "proc_velocity");
  positive(proc_accel.minCoeff(), "proc_accel");
  positive(proc_clock, "proc_clock");
  positive(proc_ambiguity, "proc_ambiguity");
  positive(proc_range_bias, "proc_range_bias");
  positive(proc_angle_bias, "proc_angle_bias");
  positive(sigma_code, "sigma_code");
  positive(sigma_phase, "sigma_phase");
  positive(sigma_range, "sigma_range");
  positive(sigma_angle, "sigma_angle");
  if (elevation_weight_code < 0.0 || elevation_weight_phase < 0.0) {
    throw ConfigError("filter tuning: elevation weights must be >= 0");
  }
  positive(tau_clock, "tau_clock");
  positive(tau_accel, "tau_accel");
  positive(gate_sigma, "gate_sigma");
  positive(propagation_step, "propagation_step");
}

FilterState::FilterState() {
  channel_prn.fill(-1);
  fixed.fill(false);
}

FilterState FilterState::initialize(const OrbitState& chief, const OrbitState& deputy,
                                    const SensorBiases& biases, const FilterTuning& t) {
  t.validate();
  FilterState s;
  s.time = chief.epoch;
  VecX sd = VecX::Zero(kStateSize);
  for (const auto& [r, st] : {std::pair{Receiver::kChief, chief}, std::pair{Receiver::kDeputy, deputy}}) {
    const int o = idx::block(r);
    s.x.segment<3>(o) = st.position;
    s.x.segment<3>(o + 3) = st.velocity;
    sd.segment<3>(o).setConstant(t.init_position);
    sd.segment<3>(o + 3).setConstant(t.init_velocity);
    sd.segment<3>(o + 6) = t.init_accel;
    sd(o + 9) = t.init_clock;
  }
  s.x(idx::kBias) = biases.range_bias;
  s.x(idx::kBias + 1) = biases.azimuth_bias;
  s.x(idx::kBias + 2) = biases.elevation_bias;
  sd(idx::kBias) = t.init_range_bias;
  sd(idx::kBias + 1) = t.init_angle_bias;
  sd(idx::kBias + 2) = t.init_angle_bias;
  s.P = sd.array().square().matrix().asDiagonal();
  return s;
}

OrbitState FilterState::spacecraft(Receiver r) const {
  const int o = idx::block(r);
  return {x.segment<3>(o), x.segment<3>(o + 3), time};
}

Vec3 FilterState::accel(Receiver r) const { return x.segment<3>(idx::block(r) + 6); }
double FilterState::clock(Receiver r) const { return x(idx::block(r) + 9); }

SensorBiases FilterState::biases() const {
  return {x(idx::kBias), x(idx::kBias + 1), x(idx::kBias + 2)};
}

Vec3 FilterState::relative_position() const {
  return x.segment<3>(idx::kDeputyPos) - x.segment<3>(idx::kChiefPos);
}

Vec3 FilterState::relative_velocity() const {
  return x.segment<3>(idx::kDeputyVel) - x.segment<3>(idx::kChiefVel);
}

int FilterState::channel_of(int prn) const {
  for (int c = 0; c < kChannels; ++c) {
    if (channel_prn[c] == prn) return c;
  }
  return -1;
}

int FilterState::active_channels() const {
  return static_cast<int>(std::count_if(channel_prn.begin(), channel_prn.end(),
                                        [](int p) { return p >= 0; }));
}

int FilterState::fixed_channels() const {
  return static_cast<int>(std::count(fixed.begin(), fixed.end(), true));
}

void FilterState::validate() const {
  if (x.size() != kStateSize || P.rows() != kStateSize || P.cols() != kStateSize) {
    throw Error("filter state must have dimension 71");
  }
  const double scale = std::max(1.0, P.cwiseAbs().maxCoeff());
  if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw Error("filter covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<MatX> eig(P, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-9 * scale) {
    throw Error("filter covariance is not positive semi-definite");
  }
  for (int c = 0; c < kChannels; ++c) {
    if (!fixed[c]) continue;
    const int i = idx::kAmbSd + c;
    if (P(i, i) != 0.0 || x(i) != std::round(x(i))) {
      throw Error("fixed channel " + std::to_string(c) + " is not an integer with zero variance");
    }
  }
}

namespace {

void symmetrize(MatX& p) { p = 0.5 * (p + p.transpose()); }

double gm_factor(double dt, double tau) { return std::isinf(tau) ? 1.0 : std::exp(-dt / tau); }

double gm_variance(double sigma, double dt, double tau) {
  return std::isinf(tau) ? sigma * sigma * dt : sigma * sigma * (1.0 - std::exp(-2.0 * dt / tau));
}

Eigen::Matrix<double, 6, 1> propagate_rv(const Eigen::Matrix<double, 9, 1>& y, double t,
                                         double dt, const FilterTuning& tuning) {
  const OrbitState out = orbit::propagate({y.head<3>(), y.segment<3>(3), t}, dt, y.tail<3>(),
                                          {tuning.propagation_step, tuning.j2});
  Eigen::Matrix<double, 6, 1> r;
  r << out.position, out.velocity;
  return r;
}

// Range and unit vector from a receiver to a transmitter.
struct Los {
  double range;
  Vec3 unit;
};
Los line_of_sight(const Vec3& rx, const Vec3& gps) {
  const Vec3 d = gps - rx;
  const double n = d.norm();
  return {n, d / n};
}

struct Row {
  RowKind kind;
  int gps_id = -1;
  double z = 0.0;
  double h = 0.0;
  double r = 0.0;  // variance
  bool angle = false;
  Eigen::RowVectorXd H = Eigen::RowVectorXd::Zero(kStateSize);
};

struct GpsLookup {
  std::map<int, std::size_t> index;  // prn -> position in epoch lists
};

GpsLookup lookup(const MeasurementEpoch& e) {
  GpsLookup g;
  for (std::size_t k = 0; k < e.sdcp.size(); ++k) g.index[e.sdcp[k].gps_id] = k;
  return g;
}

// Predicted observations and Jacobians at the current state.
std::vector<Row> build_rows(const FilterState& s, const MeasurementEpoch& e,
                            const FilterTuning& t, bool use_external) {
  std::vector<Row> rows;
  const double lam = kL1Wavelength;
  const GpsLookup g = lookup(e);
  const Vec3 rc = s.x.segment<3>(idx::kChiefPos);
  const Vec3 rd = s.x.segment<3>(idx::kDeputyPos);
  auto weighted = [](double sigma, double w, const Vec3& rx, const Vec3& unit) {
    const double c2 = 1.0 - std::pow(std::clamp(unit.dot(rx.normalized()), -1.0, 1.0), 2);
    return sigma * sigma + w * w * c2 * c2;
  };

  for (const auto& ob : e.graphic) {
    const auto it = g.index.find(ob.gps_id);
    const int ch = s.channel_of(ob.gps_id);
    if (it == g.index.end() || ch < 0) continue;
    const Vec3& p = e.gps_positions[it->second];
    const bool chief = ob.receiver == Receiver::kChief;
    const Los los = line_of_sight(chief ? rc : rd, p);
    const int o = idx::block(ob.receiver);
    Row row;
    row.kind = chief ? RowKind::kGraphicChief : RowKind::kGraphicDeputy;
    row.gps_id = ob.gps_id;
    row.z = ob.value;
    double amb = s.x(idx::kAmbZd + ch);
    row.H(idx::kAmbZd + ch) = 0.5 * lam;
    if (!chief) {
      amb -= s.x(idx::kAmbSd + ch);
      row.H(idx::kAmbSd + ch) = -0.5 * lam;
    }
    row.h = los.range + s.x(o + 9) + 0.5 * lam * amb;
    row.H.segment<3>(o) = -los.unit.transpose();
    row.H(o + 9) = 1.0;
    const Vec3& rx = chief ? rc : rd;
    row.r = 0.25 * (weighted(t.sigma_code, t.elevation_weight_code, rx, los.unit) +
                    weighted(t.sigma_phase, t.elevation_weight_phase, rx, los.unit));
    rows.push_back(std::move(row));
  }

  for (std::size_t k = 0; k < e.sdcp.size(); ++k) {
    const auto& ob = e.sdcp[k];
    const int ch = s.channel_of(ob.gps_id);
    if (ch < 0) continue;
    const Vec3& p = e.gps_positions[k];
    const Los lc = line_of_sight(rc, p);
    const Los ld = line_of_sight(rd, p);
    Row row;
    row.kind = RowKind::kSdcp;
    row.gps_id = ob.gps_id;
    row.z = ob.value;
    row.h = (lc.range - ld.range + s.x(idx::kChiefClock) - s.x(idx::kDeputyClock)) / lam +
            s.x(idx::kAmbSd + ch);
    row.H.segment<3>(idx::kChiefPos) = -lc.unit.transpose() / lam;
    row.H.segment<3>(idx::kDeputyPos) = ld.unit.transpose() / lam;
    row.H(idx::kChiefClock) = 1.0 / lam;
    row.H(idx::kDeputyClock) = -1.0 / lam;
    row.H(idx::kAmbSd + ch) = 1.0;
    row.r = (weighted(t.sigma_phase, t.elevation_weight_phase, rc, lc.unit) +
             weighted(t.sigma_phase, t.elevation_weight_phase, rd, ld.unit)) /
            (lam * lam);
    rows.push_back(std::move(row));
  }

  if (use_external && e.has_external()) {
    const Vec3 rho = e.attitude * (rd - rc);
    const SensorBiases b = s.biases();
    try {
      const Mat3 hs = meas::sensor_jacobian(rho);
      const meas::EciJacobians j{-hs * e.attitude, hs * e.attitude};
      if (e.range_obs) {
        Row row;
        row.kind = RowKind::kRange;
        row.z = *e.range_obs;
        row.h = meas::range_model(rho, b);
        row.H.segment<3>(idx::kChiefPos) = j.chief.row(0);
        row.H.segment<3>(idx::kDeputyPos) = j.deputy.row(0);
        row.H(idx::kBias) = 1.0;
        row.r = t.sigma_range * t.sigma_range;
        rows.push_back(std::move(row));
      }
      if (e.bearing_obs) {
        const BearingObs pred = meas::bearing_model(rho, b);
        const double obs[2] = {e.bearing_obs->azimuth, e.bearing_obs->elevation};
        const double prd[2] = {pred.azimuth, pred.elevation};
        for (int a = 0; a < 2; ++a) {
          Row row;
          row.kind = a == 0 ? RowKind::kAzimuth : RowKind::kElevation;
          row.z = obs[a];
          row.h = prd[a];
          row.angle = true;
          row.H.segment<3>(idx::kChiefPos) = j.chief.row(1 + a);
          row.H.segment<3>(idx::kDeputyPos) = j.deputy.row(1 + a);
          row.H(idx::kBias + 1 + a) = 1.0;
          row.r = t.sigma_angle * t.sigma_angle;
          rows.push_back(std::move(row));
        }
      }
    } catch (const SingularGeometryError&) {
      // Degenerate sensor geometry: external rows are skipped this epoch.
    }
  }
  return rows;
}

double innovation(const Row& r) { return r.angle ? wrap_angle(r.z - r.h) : r.z - r.h; }

void kalman_update(FilterState& s, const MatX& h, const VecX& nu, const VecX& r_diag) {
  const MatX pht = s.P * h.transpose();
  MatX sm = h * pht;
  sm.diagonal() += r_diag;
  const Eigen::LDLT<MatX> ldlt(sm);
  const MatX k = ldlt.solve(pht.transpose()).transpose();
  s.x += k * nu;
  MatX ikh = MatX::Identity(kStateSize, kStateSize) - k * h;
  s.P = ikh * s.P * ikh.transpose() + k * r_diag.asDiagonal() * k.transpose();
  symmetrize(s.P);
  // Fixed channels keep exact integers and zero variance.
  for (int c = 0; c < kChannels; ++c) {
    if (!s.fixed[c]) continue;
    const int i = idx::kAmbSd + c;
    s.x(i) = std::round(s.x(i));
    s.P.row(i).setZero();
    s.P.col(i).setZero();
  }
}

}  // namespace

void time_update(FilterState& s, const FilterTuning& t, double dt) {
  if (!(dt > 0.0)) throw Error("time update needs dt > 0");
  MatX phi = MatX::Identity(kStateSize, kStateSize);
  const double fa = gm_factor(dt, t.tau_accel);
  const double fc = gm_factor(dt, t.tau_clock);
  const double steps[9] = {1.0, 1.0, 1.0, 1e-3, 1e-3, 1e-3, 1e-7, 1e-7, 1e-7};

  for (const Receiver r : {Receiver::kChief, Receiver::kDeputy}) {
    const int o = idx::block(r);
    const Eigen::Matrix<double, 9, 1> y0 = s.x.segment<9>(o);
    const auto nominal = propagate_rv(y0, s.time, dt, t);
    for (int j = 0; j < 9; ++j) {
      Eigen::Matrix<double, 9, 1> yp = y0, ym = y0;
      yp(j) += steps[j];
      ym(j) -= steps[j];
      phi.block<6, 1>(o, o + j) =
          (propagate_rv(yp, s.time, dt, t) - propagate_rv(ym, s.time, dt, t)) / (2.0 * steps[j]);
    }
    for (int k = 0; k < 3; ++k) phi(o + 6 + k, o + 6 + k) = fa;
    phi(o + 9, o + 9) = fc;
    s.x.segment<6>(o) = nominal;
    s.x.segment<3>(o + 6) *= fa;
    s.x(o + 9) *= fc;
  }

  VecX q = VecX::Zero(kStateSize);
  for (const Receiver r : {Receiver::kChief, Receiver::kDeputy}) {
    const int o = idx::block(r);
    q.segment<3>(o).setConstant(t.proc_position * t.proc_position * dt);
    q.segment<3>(o + 3).setConstant(t.proc_velocity * t.proc_velocity * dt);
    for (int k = 0; k < 3; ++k) q(o + 6 + k) = gm_variance(t.proc_accel(k), dt, t.tau_accel);
    q(o + 9) = gm_variance(t.proc_clock, dt, t.tau_clock);
  }
  const double qa = t.proc_ambiguity * t.proc_ambiguity * dt;
  for (int c = 0; c < kChannels; ++c) {
    if (s.channel_prn[c] < 0) continue;
    q(idx::kAmbZd + c) = qa;
    if (!s.fixed[c]) q(idx::kAmbSd + c) = qa;
  }
  q(idx::kBias) = t.proc_range_bias * t.proc_range_bias * dt;
  q(idx::kBias + 1) = t.proc_angle_bias * t.proc_angle_bias * dt;
  q(idx::kBias + 2) = t.proc_angle_bias * t.proc_angle_bias * dt;

  s.P = phi * s.P * phi.transpose();
  s.P.diagonal() += q;
  symmetrize(s.P);
  s.time += dt;
}

void apply_impulse(FilterState& s, Receiver r, const Vec3& dv_eci, double sigma_exec) {
  const int o = idx::block(r) + 3;
  s.x.segment<3>(o) += dv_eci;
  for (int k = 0; k < 3; ++k) s.P(o + k, o + k) += sigma_exec * sigma_exec;
}

void release_channel(FilterState& s, int c) {
  for (const int i : {idx::kAmbZd + c, idx::kAmbSd + c}) {
    s.x(i) = 0.0;
    s.P.row(i).setZero();
    s.P.col(i).setZero();
  }
  s.channel_prn[c] = -1;
  s.fixed[c] = false;
}

ChannelChange sync_channels(FilterState& s, const MeasurementEpoch& e, const FilterTuning& t) {
  ChannelChange change;
  const GpsLookup g = lookup(e);
  for (int c = 0; c < kChannels; ++c) {
    if (s.channel_prn[c] >= 0 && !g.index.count(s.channel_prn[c])) {
      change.released_prn.push_back(s.channel_prn[c]);
      release_channel(s, c);
    }
  }
  const double lam = kL1Wavelength;
  const Vec3 rc = s.x.segment<3>(idx::kChiefPos);
  const Vec3 rd = s.x.segment<3>(idx::kDeputyPos);
  for (std::size_t k = 0; k < e.sdcp.size(); ++k) {
    const int prn = e.sdcp[k].gps_id;
    if (s.channel_of(prn) >= 0) continue;
    int c = s.channel_of(-1);
    if (c < 0) break;
    s.channel_prn[c] = prn;
    s.fixed[c] = false;
    const Vec3& p = e.gps_positions[k];
    const double range_c = (p - rc).norm();
    const double range_d = (p - rd).norm();
    double zd = 0.0;
    for (const auto& ob : e.graphic) {
      if (ob.gps_id == prn && ob.receiver == Receiver::kChief) {
        zd = 2.0 * (ob.value - range_c - s.x(idx::kChiefClock)) / lam;
      }
    }
    const double sd = e.sdcp[k].value -
                      (range_c - range_d + s.x(idx::kChiefClock) - s.x(idx::kDeputyClock)) / lam;
    const double var = t.init_ambiguity * t.init_ambiguity;
    for (const auto& [i, v] : {std::pair{idx::kAmbZd + c, zd}, std::pair{idx::kAmbSd + c, sd}}) {
      s.x(i) = v;
      s.P.row(i).setZero();
      s.P.col(i).setZero();
      s.P(i, i) = var;
    }
    change.allocated_prn.push_back(prn);
  }
  return change;
}

ResidualReport measurement_update(FilterState& s, const MeasurementEpoch& e,
                                  const FilterTuning& t, bool use_external) {
  if (std::abs(e.time - s.time) > 1e-9) {
    throw TimeTagError("measurement epoch " + std::to_string(e.time) +
                       " does not match filter time " + std::to_string(s.time));
  }
  e.validate();
  std::vector<Row> rows = build_rows(s, e, t, use_external);
  ResidualReport report;
  std::vector<int> accepted;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Row& r = rows[k];
    ResidualRow rr;
    rr.kind = r.kind;
    rr.gps_id = r.gps_id;
    rr.innovation = innovation(r);
    rr.innovation_var = (r.H * s.P * r.H.transpose())(0, 0) + r.r;
    rr.accepted = std::abs(rr.innovation) <= t.gate_sigma * std::sqrt(rr.innovation_var);
    if (rr.accepted) {
      accepted.push_back(static_cast<int>(k));
    } else {
      ++report.rejected;
    }
    report.rows.push_back(rr);
  }
  if (!accepted.empty()) {
    const auto m = static_cast<Eigen::Index>(accepted.size());
    MatX h(m, kStateSize);
    VecX nu(m), rd(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const Row& r = rows[accepted[i]];
      h.row(i) = r.H;
      nu(i) = innovation(r);
      rd(i) = r.r;
    }
    kalman_update(s, h, nu, rd);
  }
  const std::vector<Row> post = build_rows(s, e, t, use_external);
  for (std::size_t k = 0; k < post.size() && k < report.rows.size(); ++k) {
    report.rows[k].postfit = innovation(post[k]);
  }
  return report;
}

void constrain(FilterState& s, const MatX& h, const VecX& z, double variance) {
  if (h.cols() != kStateSize || h.rows() != z.size()) throw Error("constraint dimension mismatch");
  if (h.rows() == 0) return;
  kalman_update(s, h, z - h * s.x, VecX::Constant(z.size(), variance));
}

void apply_fixes(FilterState& s, const std::vector<int>& channels,
                 const std::vector<std::int64_t>& values) {
  if (channels.size() != values.size()) throw FixError("fix channel/value count mismatch");
  for (const int c : channels) {
    if (c < 0 || c >= kChannels || s.channel_prn[c] < 0) {
      throw FixError("cannot fix inactive channel " + std::to_string(c));
    }
    if (s.fixed[c]) throw FixError("channel " + std::to_string(c) + " is already fixed");
  }
  for (std::size_t k = 0; k < channels.size(); ++k) {
    const int i = idx::kAmbSd + channels[k];
    s.x(i) = static_cast<double>(values[k]);
    s.P.row(i).setZero();
    s.P.col(i).setZero();
    s.fixed[channels[k]] = true;
  }
}

DareResult dare_steady_state(const DareConfig& cfg) {
  if (!(cfg.q >= 0.0)) throw Error("DARE process noise must be non-negative");
  if (!(cfg.r > 0.0)) throw Error("DARE measurement noise must be positive");
  if (cfg.n < 1) throw Error("DARE dimension must be positive");
  const int n = cfg.n;
  MatX c;
  if (cfg.sensitivity == DareSensitivity::kScaledIdentity) {
    c = cfg.wavelength * MatX::Identity(n, n);
  } else {
    c = cfg.wavelength * MatX::Ones(1, n);
  }
  const auto m = c.rows();
  const double rv = cfg.units == DareNoiseUnits::kCycles ? cfg.r / cfg.wavelength : cfg.r * cfg.r;
  if (cfg.units == DareNoiseUnits::kCycles && cfg.wavelength == 0.0) {
    throw Error("cycle units need a non-zero wavelength");
  }
  const MatX r = rv * MatX::Identity(m, m);
  const MatX q = cfg.q * MatX::Identity(n, n);

  DareResult out;
  // With A = I the unobservable subspace is the null space of C.
  Eigen::FullPivLU<MatX> lu(c);
  out.unobservable_dimension = n - static_cast<int>(lu.rank());
  if (cfg.wavelength == 0.0) out.unobservable_dimension = n;
  if (cfg.q > 0.0 && out.unobservable_dimension > 0) {
    out.bounded = false;
    return out;
  }
  if (cfg.q == 0.0) {
    out.prior_variances = VecX::Zero(n);
    out.posterior_variances = VecX::Zero(n);
    out.success_rate = 1.0;
    return out;
  }
  MatX sig = MatX::Identity(n, n);
  for (int k = 0; k < cfg.max_iterations; ++k) {
    const MatX sct = sig * c.transpose();
    const MatX gain = (c * sct + r).ldlt().solve(sct.transpose());
    MatX next = sig + q - sct * gain;
    next = 0.5 * (next + next.transpose());
    const double change = (next - sig).cwiseAbs().maxCoeff() / std::max(next.cwiseAbs().maxCoeff(), 1e-300);
    sig = next;
    out.iterations = k + 1;
    if (change < 1e-12) break;
  }
  const MatX sct = sig * c.transpose();
  const MatX post = sig - sct * (c * sct + r).ldlt().solve(sct.transpose());
  out.prior_variances = sig.diagonal();
  out.posterior_variances = post.diagonal();
  out.success_rate = iar::success_rate(out.prior_variances.cwiseSqrt(), n);
  return out;
}

NavMetrics navigation_metrics(const std::vector<EpochRecord>& history,
                              const std::vector<bool>& fix_correct, double start_time) {
  NavMetrics m;
  double sp_pre = 0.0, sp_post = 0.0, sv_pre = 0.0, sv_post = 0.0, frac = 0.0;
  Vec3 sum = Vec3::Zero(), sum2 = Vec3::Zero();
  int tracked = 0;
  for (const auto& h : history) {
    if (h.time < start_time) continue;
    const Vec3 ep = h.target_rtn * (h.est_rel_pos - h.true_rel_pos);
    const Vec3 ev = h.target_rtn * (h.est_rel_vel - h.true_rel_vel);
    if (h.fixed_channels > 0) {
      sp_post += ep.squaredNorm();
      sv_post += ev.squaredNorm();
      sum += ep;
      sum2 += ep.cwiseProduct(ep);
      ++m.epochs_post;
    } else {
      sp_pre += ep.squaredNorm();
      sv_pre += ev.squaredNorm();
      ++m.epochs_pre;
    }
    if (h.active_channels > 0) {
      frac += static_cast<double>(h.fixed_channels) / h.active_channels;
      ++tracked;
    }
  }
  if (m.epochs_pre > 0) {
    m.pos_rms_pre = std::sqrt(sp_pre / m.epochs_pre);
    m.vel_rms_pre = std::sqrt(sv_pre / m.epochs_pre);
  }
  if (m.epochs_post > 0) {
    m.pos_rms_post = std::sqrt(sp_post / m.epochs_post);
    m.vel_rms_post = std::sqrt(sv_post / m.epochs_post);
    m.pos_mean_post = sum / m.epochs_post;
    m.pos_std_post =
        (sum2 / m.epochs_post - m.pos_mean_post.cwiseProduct(m.pos_mean_post)).cwiseMax(0.0).cwiseSqrt();
  }
  if (tracked > 0) m.mean_fixed_fraction = frac / tracked;
  m.fixes = static_cast<int>(fix_correct.size());
  m.wrong_fixes = static_cast<int>(std::count(fix_correct.begin(), fix_correct.end(), false));
  m.wrong_fix_rate = m.fixes > 0 ? static_cast<double>(m.wrong_fixes) / m.fixes : 0.0;
  return m;
}

void write_snapshot_header(std::ostream& os) {
  os << "time";
  for (int i = 0; i < kStateSize; ++i) os << ",x" << i;
  for (int i = 0; i < kStateSize; ++i) os << ",sd" << i;
  for (int c = 0; c < kChannels; ++c) os << ",fixed" << c;
  os << '\n';
}

void write_snapshot_row(std::ostream& os, const FilterState& s) {
  const auto old = os.precision(17);
  os << s.time;
  for (int i = 0; i < kStateSize; ++i) os << ',' << s.x(i);
  for (int i = 0; i < kStateSize; ++i) os << ',' << std::sqrt(std::max(0.0, s.P(i, i)));
  for (int c = 0; c < kChannels; ++c) os << ',' << (s.fixed[c] ? 1 : 0);
  os << '\n';
  os.precision(old);
}

}  // namespace cdgps::nav
