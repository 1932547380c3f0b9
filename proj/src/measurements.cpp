#include "cdgps/measurements.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cdgps {

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * constants::kPi);
  if (a <= -constants::kPi) a += 2.0 * constants::kPi;
  return a;
}

void MeasurementEpoch::validate() const {
  if (has_external() && attitude_time != time) {
    throw TimeTagError("attitude time tag " + std::to_string(attitude_time) +
                       " does not match measurement time tag " + std::to_string(time));
  }
  if (has_gps()) {
    const bool found = std::any_of(sdcp.begin(), sdcp.end(), [&](const SdcpObs& o) {
      return o.gps_id == ddcp_reference;
    });
    if (!found) {
      throw PairingError("DDCP reference " + std::to_string(ddcp_reference) +
                         " is not among the SDCP observations");
    }
    if (gps_positions.size() != sdcp.size() || gps_elevations.size() != sdcp.size()) {
      throw PairingError("GPS ephemeris list does not match the SDCP list");
    }
  }
}

namespace meas {

double undifferenced_phase(double geom_range, double ambiguity_cycles, double iono,
                           double rx_clock, double gps_clock, double windup,
                           double noise, double wavelength) {
  return (geom_range + wavelength * ambiguity_cycles + iono + rx_clock - gps_clock +
          windup + noise) /
         wavelength;
}

double graphic(double pseudorange, double phase_cycles, double wavelength) {
  return 0.5 * pseudorange + 0.5 * wavelength * phase_cycles;
}

SingleDifference single_difference(const CarrierPhaseObs& a, const CarrierPhaseObs& b) {
  if (a.gps_id != b.gps_id) {
    throw PairingError("single difference of different transmitters " +
                       std::to_string(a.gps_id) + " / " + std::to_string(b.gps_id));
  }
  return {a.gps_id, a.receiver_id, b.receiver_id, a.phase - b.phase,
          a.pseudorange - b.pseudorange};
}

DoubleDifference double_difference(const SingleDifference& sd_p,
                                   const SingleDifference& sd_q) {
  if (sd_p.receiver_a != sd_q.receiver_a || sd_p.receiver_b != sd_q.receiver_b) {
    throw PairingError("double difference across different receiver pairs");
  }
  return {sd_p.gps_id, sd_q.gps_id, sd_p.receiver_a, sd_p.receiver_b,
          sd_p.phase - sd_q.phase, sd_p.pseudorange - sd_q.pseudorange};
}

Vec3 ddcp_geometry_row(const Vec3& los_p, const Vec3& los_q) {
  if (std::abs(los_p.norm() - 1.0) > 1e-9 || std::abs(los_q.norm() - 1.0) > 1e-9) {
    throw NormalizationError("line-of-sight vectors must be unit norm");
  }
  return los_p - los_q;
}

double range_model(const Vec3& rel_pos_sensor, const SensorBiases& biases) {
  const double r = rel_pos_sensor.norm();
  if (r <= 0.0) throw SingularGeometryError("range undefined for a zero baseline");
  return r + biases.range_bias;
}

BearingObs bearing_model(const Vec3& rel_pos_sensor, const SensorBiases& biases) {
  const double r = rel_pos_sensor.norm();
  if (r <= 0.0) throw SingularGeometryError("bearing undefined for a zero baseline");
  const double x = rel_pos_sensor.x();
  const double z = rel_pos_sensor.z();
  if (x == 0.0 && z == 0.0) {
    throw SingularGeometryError("target on the sensor y axis: elevation undefined");
  }
  const double s = std::clamp(rel_pos_sensor.y() / r, -1.0, 1.0);
  return {std::asin(s) + biases.azimuth_bias, std::atan2(x, z) + biases.elevation_bias};
}

Mat3 sensor_jacobian(const Vec3& p) {
  const double x = p.x(), y = p.y(), z = p.z();
  const double r2 = p.squaredNorm();
  const double r = std::sqrt(r2);
  const double xz2 = x * x + z * z;
  if (r == 0.0 || xz2 == 0.0) {
    throw SingularGeometryError("sensor Jacobian undefined at this geometry");
  }
  // R^3 cos(alpha) = R^2 sqrt(x^2 + z^2); cos^2(eps)/z = z/(x^2 + z^2).
  const double r3cos = r2 * std::sqrt(xz2);
  Mat3 h;
  h << x / r, y / r, z / r,
      -x * y / r3cos, xz2 / r3cos, -y * z / r3cos,
      z / xz2, 0.0, -x / xz2;
  return h;
}

bool is_rotation(const Mat3& dcm, double tol) {
  return (dcm * dcm.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(dcm.determinant() - 1.0) <= tol;
}

Mat3 transform_jacobian(const Mat3& h_sensor, const Mat3& dcm) {
  if (!is_rotation(dcm)) throw FrameError("direction cosine matrix is not orthonormal");
  return h_sensor * dcm;
}

EciJacobians eci_jacobians(const Vec3& rel_pos_sensor, const Mat3& dcm) {
  const Mat3 h = transform_jacobian(sensor_jacobian(rel_pos_sensor), dcm);
  return {-h, h};
}

}  // namespace meas
}  // namespace cdgps
