#pragma once

// Carrier-phase and code observation models, differencing, GRAPHIC and the
// external range/bearing sensor models with their Jacobians.

#include "cdgps/common.hpp"

#include <optional>
#include <vector>

namespace cdgps {

enum class Receiver : int { kChief = 0, kDeputy = 1 };

struct CarrierPhaseObs {
  double phase = 0.0;        // cycles
  double pseudorange = 0.0;  // m
  int gps_id = 0;
  int receiver_id = 0;
  double time = 0.0;  // s
  double c_n0 = 0.0;  // dB-Hz
};

struct SensorBiases {
  double range_bias = 0.0;      // m
  double azimuth_bias = 0.0;    // rad
  double elevation_bias = 0.0;  // rad
};

struct GraphicObs {
  int gps_id = 0;
  Receiver receiver = Receiver::kChief;
  double value = 0.0;  // m
};

struct SdcpObs {
  int gps_id = 0;
  double value = 0.0;  // cycles
};

struct BearingObs {
  double azimuth = 0.0;    // rad
  double elevation = 0.0;  // rad
};

/// One time-tagged bundle of observations plus the attitude used to interpret
/// the external sensor data.
struct MeasurementEpoch {
  double time = 0.0;
  std::vector<GraphicObs> graphic;
  std::vector<SdcpObs> sdcp;
  int ddcp_reference = -1;
  std::optional<double> range_obs;
  std::optional<BearingObs> bearing_obs;
  Mat3 attitude = Mat3::Identity();  // ECI -> sensor frame
  double attitude_time = 0.0;

  // Broadcast GPS positions (ECI) and elevation above the chief's local
  // horizontal for every satellite in `sdcp`, same order.
  std::vector<Vec3> gps_positions;
  std::vector<double> gps_elevations;

  bool has_gps() const { return !sdcp.empty(); }
  bool has_external() const { return range_obs.has_value() || bearing_obs.has_value(); }
  /// Throws if the invariants (shared time tag, reference in SDCP set) fail.
  void validate() const;
};

namespace meas {

/// Undifferenced carrier phase [cycles] from its additive components [m].
double undifferenced_phase(double geom_range, double ambiguity_cycles, double iono,
                           double rx_clock, double gps_clock, double windup,
                           double noise, double wavelength);

/// Half-sum of code pseudorange [m] and carrier phase [cycles].
double graphic(double pseudorange, double phase_cycles, double wavelength);

struct SingleDifference {
  int gps_id = 0;
  int receiver_a = 0;
  int receiver_b = 0;
  double phase = 0.0;
  double pseudorange = 0.0;
};

struct DoubleDifference {
  int gps_p = 0;
  int gps_q = 0;
  int receiver_a = 0;
  int receiver_b = 0;
  double phase = 0.0;
  double pseudorange = 0.0;
};

/// A - B for one transmitter. Throws PairingError on mismatched gps_id.
SingleDifference single_difference(const CarrierPhaseObs& a, const CarrierPhaseObs& b);

/// SD(P) - SD(Q) for one receiver pair. Throws PairingError on mismatch.
DoubleDifference double_difference(const SingleDifference& sd_p,
                                   const SingleDifference& sd_q);

/// g_P - g_Q. Throws NormalizationError unless both inputs are unit vectors.
Vec3 ddcp_geometry_row(const Vec3& los_p, const Vec3& los_q);

/// ||rho|| + B_R. Throws SingularGeometryError for the zero vector.
double range_model(const Vec3& rel_pos_sensor, const SensorBiases& biases);

/// (alpha, epsilon): alpha = asin(y/R) + B_a, epsilon = atan2(x, z) + B_e.
BearingObs bearing_model(const Vec3& rel_pos_sensor, const SensorBiases& biases);

/// Rows d(R, alpha, epsilon)/d(x, y, z) in the sensor frame.
Mat3 sensor_jacobian(const Vec3& rel_pos_sensor);

/// H * Theta. Throws FrameError if `dcm` is not orthonormal.
Mat3 transform_jacobian(const Mat3& h_sensor, const Mat3& dcm);

/// Jacobians with respect to the chief and deputy ECI positions.
struct EciJacobians {
  Mat3 chief;
  Mat3 deputy;
};
EciJacobians eci_jacobians(const Vec3& rel_pos_sensor, const Mat3& dcm);

/// True iff `dcm` is a proper rotation to `tol`.
bool is_rotation(const Mat3& dcm, double tol = 1e-9);

}  // namespace meas
}  // namespace cdgps
