#include "cdgps/orbit.hpp"

#include "cdgps/measurements.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cdgps {

using namespace constants;

void OrbitState::validate() const {
  if (!position.allFinite() || !velocity.allFinite()) {
    throw PropagationError("non-finite orbit state");
  }
  if (position.norm() <= kEarthRadius) {
    throw PropagationError("trajectory below the Earth's surface at t = " +
                           std::to_string(epoch));
  }
}

namespace orbit {

namespace {

double solve_kepler(double m, double e) {
  double ea = e < 0.8 ? m : kPi;
  for (int k = 0; k < 50; ++k) {
    const double f = ea - e * std::sin(ea) - m;
    const double step = f / (1.0 - e * std::cos(ea));
    ea -= step;
    if (std::abs(step) < 1e-15) break;
  }
  return ea;
}

Mat3 perifocal_to_eci(double raan, double i, double argp) {
  return (Eigen::AngleAxisd(raan, Vec3::UnitZ()) * Eigen::AngleAxisd(i, Vec3::UnitX()) *
          Eigen::AngleAxisd(argp, Vec3::UnitZ()))
      .toRotationMatrix();
}

struct Deriv {
  Vec3 dr;
  Vec3 dv;
};

Deriv derivative(const Vec3& r, const Vec3& v, const Vec3& emp, bool j2) {
  return {v, acceleration(r, v, emp, j2)};
}

}  // namespace

double orbital_period(double a) { return 2.0 * kPi * std::sqrt(a * a * a / kEarthMu); }

OrbitState kepler_to_state(const KeplerElements& el, double t) {
  const double n = std::sqrt(kEarthMu / (el.a * el.a * el.a));
  const double m = el.mean_anomaly + n * (t - el.epoch);
  const double ea = solve_kepler(std::remainder(m, 2.0 * kPi), el.e);
  const double c = std::cos(ea), s = std::sin(ea);
  const double sq = std::sqrt(1.0 - el.e * el.e);
  const Vec3 r_pf(el.a * (c - el.e), el.a * sq * s, 0.0);
  const double rdot = n * el.a / (1.0 - el.e * c);
  const Vec3 v_pf(-rdot * s, rdot * sq * c, 0.0);
  const Mat3 rot = perifocal_to_eci(el.raan, el.i, el.argp);
  return {rot * r_pf, rot * v_pf, t};
}

KeplerElements state_to_kepler(const OrbitState& s) {
  const Vec3& r = s.position;
  const Vec3& v = s.velocity;
  const Vec3 h = r.cross(v);
  const Vec3 node = Vec3::UnitZ().cross(h);
  const Vec3 ecc = v.cross(h) / kEarthMu - r.normalized();
  KeplerElements el;
  el.epoch = s.epoch;
  el.a = 1.0 / (2.0 / r.norm() - v.squaredNorm() / kEarthMu);
  el.e = ecc.norm();
  el.i = std::acos(std::clamp(h.z() / h.norm(), -1.0, 1.0));
  el.raan = std::atan2(node.y(), node.x());
  // Argument of latitude is always well defined; split it using the
  // eccentricity vector when e is non-negligible.
  const Vec3 n_hat = node.norm() > 1e-12 ? node.normalized() : Vec3::UnitX();
  const Vec3 m_hat = h.normalized().cross(n_hat);
  const double u = std::atan2(r.dot(m_hat), r.dot(n_hat));
  if (el.e > 1e-10) {
    el.argp = std::atan2(ecc.dot(m_hat), ecc.dot(n_hat));
    const double nu = u - el.argp;
    const double ea = 2.0 * std::atan(std::sqrt((1.0 - el.e) / (1.0 + el.e)) * std::tan(nu / 2.0));
    el.mean_anomaly = ea - el.e * std::sin(ea);
  } else {
    el.argp = 0.0;
    el.mean_anomaly = u;
  }
  return el;
}

Vec3 acceleration(const Vec3& r, const Vec3& v, const Vec3& emp_accel_rtn, bool j2) {
  const double rn = r.norm();
  Vec3 a = -kEarthMu / (rn * rn * rn) * r;
  if (j2) {
    const double z2 = r.z() * r.z() / (rn * rn);
    const double k = -1.5 * kEarthJ2 * kEarthMu * kEarthRadius * kEarthRadius / std::pow(rn, 5);
    a += k * Vec3(r.x() * (1.0 - 5.0 * z2), r.y() * (1.0 - 5.0 * z2), r.z() * (3.0 - 5.0 * z2));
  }
  if (!emp_accel_rtn.isZero()) {
    a += rtn_frame({r, v, 0.0}).transpose() * emp_accel_rtn;
  }
  return a;
}

OrbitState propagate(const OrbitState& state, double dt, const Vec3& emp_accel_rtn,
                     const PropagationOptions& opts) {
  state.validate();
  if (dt == 0.0) return state;
  const int steps = static_cast<int>(std::ceil(std::abs(dt) / opts.max_step - 1e-9));
  const double h = dt / steps;
  Vec3 r = state.position, v = state.velocity;
  for (int k = 0; k < steps; ++k) {
    const Deriv k1 = derivative(r, v, emp_accel_rtn, opts.j2);
    const Deriv k2 = derivative(r + 0.5 * h * k1.dr, v + 0.5 * h * k1.dv, emp_accel_rtn, opts.j2);
    const Deriv k3 = derivative(r + 0.5 * h * k2.dr, v + 0.5 * h * k2.dv, emp_accel_rtn, opts.j2);
    const Deriv k4 = derivative(r + h * k3.dr, v + h * k3.dv, emp_accel_rtn, opts.j2);
    r += h / 6.0 * (k1.dr + 2.0 * k2.dr + 2.0 * k3.dr + k4.dr);
    v += h / 6.0 * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
    if (r.norm() <= kEarthRadius || !r.allFinite()) {
      throw PropagationError("trajectory intersects the Earth during propagation");
    }
  }
  return {r, v, state.epoch + dt};
}

Mat3 rtn_frame(const OrbitState& s) {
  const Vec3 h = s.position.cross(s.velocity);
  if (h.norm() <= 1e-9 * s.position.norm() * s.velocity.norm() || s.position.norm() == 0.0) {
    throw FrameError("RTN frame undefined for parallel position and velocity");
  }
  const Vec3 rh = s.position.normalized();
  const Vec3 nh = h.normalized();
  const Vec3 th = nh.cross(rh);
  Mat3 m;
  m.row(0) = rh.transpose();
  m.row(1) = th.transpose();
  m.row(2) = nh.transpose();
  return m;
}

Mat3 eci_to_ecef(double t) {
  const double th = kEarthRotationRate * t;
  Mat3 m;
  m << std::cos(th), std::sin(th), 0.0, -std::sin(th), std::cos(th), 0.0, 0.0, 0.0, 1.0;
  return m;
}

Visibility visibility(const Vec3& receiver, const Vec3& gps,
                      const GpsConstellation& constellation, LobeMode mode,
                      const Mat3& sensor_dcm) {
  Visibility out;
  const Vec3 d = receiver - gps;  // transmitter -> receiver
  const double dist = d.norm();
  // Closest approach of the segment to the Earth's centre.
  const double t = std::clamp(-gps.dot(d) / (dist * dist), 0.0, 1.0);
  out.occluded = (gps + t * d).norm() < constellation.occlusion_radius;
  const Vec3 nadir = -gps.normalized();
  out.off_boresight = std::acos(std::clamp(nadir.dot(d / dist), -1.0, 1.0));
  out.in_mainlobe = out.off_boresight <= constellation.mainlobe_halfcone;
  const double cone = mode == LobeMode::kMainlobe ? constellation.mainlobe_halfcone
                                                  : constellation.sidelobe_halfcone;
  out.visible = !out.occluded && out.off_boresight <= cone;
  const Vec3 arrival = sensor_dcm * (gps - receiver);
  if (arrival.x() != 0.0 || arrival.z() != 0.0) {
    const BearingObs b = meas::bearing_model(arrival, {});
    out.azimuth = b.azimuth;
    out.elevation = b.elevation;
  }
  return out;
}

}  // namespace orbit

GpsConstellation GpsConstellation::nominal() {
  GpsConstellation c;
  const int per_plane[6] = {6, 5, 5, 5, 5, 5};
  int prn = 1;
  for (int p = 0; p < 6; ++p) {
    for (int k = 0; k < per_plane[p]; ++k) {
      KeplerElements el;
      el.a = 26'560e3;
      el.i = 55.0 * kDeg;
      el.raan = p * 60.0 * kDeg;
      el.mean_anomaly = 2.0 * kPi * k / per_plane[p] + p * 2.0 * kPi / 31.0;
      c.satellites.push_back({prn++, el});
    }
  }
  return c;
}

}  // namespace cdgps
