#pragma once

// Orbit propagation (two-body + J2 + RTN empirical acceleration), Kepler
// elements, frames and GPS constellation visibility.

#include "cdgps/common.hpp"

#include <vector>

namespace cdgps {

struct OrbitState {
  Vec3 position = Vec3::Zero();  // ECI, m
  Vec3 velocity = Vec3::Zero();  // ECI, m/s
  double epoch = 0.0;            // s

  /// Throws PropagationError if non-finite or below the Earth's surface.
  void validate() const;
};

struct KeplerElements {
  double a = 0.0;     // m
  double e = 0.0;
  double i = 0.0;     // rad
  double raan = 0.0;  // rad
  double argp = 0.0;  // rad
  double mean_anomaly = 0.0;  // rad at `epoch`
  double epoch = 0.0;
};

namespace orbit {

/// Two-body state from Kepler elements at time `t`.
OrbitState kepler_to_state(const KeplerElements& el, double t);

/// Osculating elements of a state (two-body).
KeplerElements state_to_kepler(const OrbitState& s);

struct PropagationOptions {
  double max_step = 10.0;  // s
  bool j2 = true;
};

/// Gravity (two-body + optional J2) plus an RTN acceleration, in ECI.
Vec3 acceleration(const Vec3& r, const Vec3& v, const Vec3& emp_accel_rtn, bool j2);

/// Fixed-step RK4 over `dt` seconds (dt may be negative for back-propagation).
OrbitState propagate(const OrbitState& state, double dt, const Vec3& emp_accel_rtn,
                     const PropagationOptions& opts = {});

/// ECI -> RTN direction cosine matrix (rows R, T, N).
Mat3 rtn_frame(const OrbitState& state);

/// ECI -> ECEF rotation at `t` seconds after the reference epoch.
Mat3 eci_to_ecef(double t);

double orbital_period(double a);

}  // namespace orbit

struct GpsSatellite {
  int prn = 0;
  KeplerElements elements;
};

enum class LobeMode { kMainlobe, kSidelobe };

struct GpsConstellation {
  std::vector<GpsSatellite> satellites;
  double mainlobe_halfcone = 23.5 * constants::kDeg;
  double sidelobe_halfcone = 60.0 * constants::kDeg;
  double occlusion_radius = constants::kEarthRadius + 50e3;

  /// 31 satellites, 6 planes, 55 deg, a = 26,560 km, evenly phased.
  static GpsConstellation nominal();
};

struct Visibility {
  bool visible = false;
  bool occluded = false;
  bool in_mainlobe = false;
  double off_boresight = 0.0;  // rad, at the transmitter
  double azimuth = 0.0;        // arrival direction in the sensor frame, rad
  double elevation = 0.0;
};

namespace orbit {

/// Line-of-sight test (spherical Earth + atmosphere mask) and transmitter
/// antenna cone. `sensor_dcm` maps ECI to the receiver frame used to report
/// the arrival azimuth/elevation.
Visibility visibility(const Vec3& receiver, const Vec3& gps,
                      const GpsConstellation& constellation, LobeMode mode,
                      const Mat3& sensor_dcm = Mat3::Identity());

}  // namespace orbit
}  // namespace cdgps
