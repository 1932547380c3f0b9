#pragma once

// Extended Kalman filter over the joint chief/deputy state:
//   r_c v_c a_c clk_c | r_d v_d a_d clk_d | N_ZD[24] | N_SD[24] | B[3]
// Empirical accelerations are RTN, clocks and ambiguities in meters/cycles.

#include "cdgps/common.hpp"
#include "cdgps/measurements.hpp"
#include "cdgps/orbit.hpp"

#include <array>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace cdgps::nav {

inline constexpr int kStateSize = 71;
inline constexpr int kChannels = 24;

namespace idx {
inline constexpr int kChiefPos = 0;
inline constexpr int kChiefVel = 3;
inline constexpr int kChiefAcc = 6;
inline constexpr int kChiefClock = 9;
inline constexpr int kDeputyPos = 10;
inline constexpr int kDeputyVel = 13;
inline constexpr int kDeputyAcc = 16;
inline constexpr int kDeputyClock = 19;
inline constexpr int kAmbZd = 20;
inline constexpr int kAmbSd = 44;
inline constexpr int kBias = 68;
inline constexpr int block(Receiver r) { return r == Receiver::kChief ? 0 : 10; }
}  // namespace idx

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct FilterTuning {
  // Initial 1-sigma.
  double init_position = 1000.0;
  double init_velocity = 1.0;
  Vec3 init_accel{1.0e-6, 2.0e-6, 0.75e-6};
  double init_clock = 100.0;
  double init_ambiguity = 1000.0;
  double init_range_bias = 1e-9;
  double init_angle_bias = 1e-5 * constants::kArcsec;

  // Process noise 1-sigma. Position, velocity, ambiguities and biases are
  // densities per sqrt(s); clocks and accelerations are steady-state
  // Gauss-Markov sigmas.
  double proc_position = 1e-6;
  double proc_velocity = 1e-9;
  Vec3 proc_accel{1.0e-6, 1.0e-6, 0.5e-6};
  double proc_clock = 5.0;
  double proc_ambiguity = 5.0;
  double proc_range_bias = 1e-9;
  double proc_angle_bias = 1e-5 * constants::kArcsec;

  // Measurement noise 1-sigma.
  double sigma_code = 1.5;     // m
  double sigma_phase = 0.015;  // m
  double sigma_range = 0.005;  // m
  double sigma_angle = 100.0 * constants::kArcsec;
  // Optional elevation weighting: sigma^2 + (w cos^2 el)^2 with el above the
  // local horizon of the receiver estimate. Zero keeps the weights flat.
  double elevation_weight_code = 0.0;   // m
  double elevation_weight_phase = 0.0;  // m

  double tau_clock = 60.0;  // s, infinity for a random walk
  double tau_accel = 900.0;

  double gate_sigma = 5.0;
  double propagation_step = 30.0;  // RK4 substep of the filter model
  bool j2 = true;

  static FilterTuning leo();
  static FilterTuning geo();
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct FilterState {
  VecX x = VecX::Zero(kStateSize);
  MatX P = MatX::Zero(kStateSize, kStateSize);
  double time = 0.0;
  std::array<int, kChannels> channel_prn;  // -1 when free
  std::array<bool, kChannels> fixed;

  FilterState();

  static FilterState initialize(const OrbitState& chief, const OrbitState& deputy,
                                const SensorBiases& biases, const FilterTuning& tuning);

  OrbitState spacecraft(Receiver r) const;
  Vec3 accel(Receiver r) const;
  double clock(Receiver r) const;
  SensorBiases biases() const;
  Vec3 relative_position() const;  // r_d - r_c, ECI
  Vec3 relative_velocity() const;

  int channel_of(int prn) const;  // -1 if not allocated
  int active_channels() const;
  int fixed_channels() const;

  /// Symmetry / PSD / dimension checks. Throws Error on violation.
  void validate() const;
};

/// Propagates mean and covariance over `dt` seconds.
void time_update(FilterState& s, const FilterTuning& tuning, double dt);

/// Impulsive velocity change with known magnitude and execution uncertainty.
void apply_impulse(FilterState& s, Receiver r, const Vec3& dv_eci, double sigma_exec);

/// Releases channels whose satellite left the epoch and allocates new ones.
/// New channels are initialized so their first innovation is zero.
struct ChannelChange {
  std::vector<int> released_prn;
  std::vector<int> allocated_prn;
};
ChannelChange sync_channels(FilterState& s, const MeasurementEpoch& epoch,
                            const FilterTuning& tuning);

enum class RowKind { kGraphicChief, kGraphicDeputy, kSdcp, kRange, kAzimuth, kElevation };

struct ResidualRow {
  RowKind kind = RowKind::kSdcp;
  int gps_id = -1;
  double innovation = 0.0;
  double innovation_var = 0.0;
  double postfit = 0.0;
  bool accepted = true;
};

struct ResidualReport {
  std::vector<ResidualRow> rows;
  int rejected = 0;
};

/// Joint EKF update over every GPS and (if `use_external`) range/bearing row.
/// Rows beyond the innovation gate are skipped and reported.
ResidualReport measurement_update(FilterState& s, const MeasurementEpoch& epoch,
                                  const FilterTuning& tuning, bool use_external = true);

/// Linear pseudo-measurement H x = z with noise variance `variance`.
void constrain(FilterState& s, const MatX& h, const VecX& z, double variance);

/// Overwrites SD ambiguities of `channels` with integers and zeroes their
/// covariance rows/columns. Throws FixError if a channel is free or fixed.
void apply_fixes(FilterState& s, const std::vector<int>& channels,
                 const std::vector<std::int64_t>& values);

/// Clears all fix flags of a channel (used when it is released).
void release_channel(FilterState& s, int channel);

// ---- steady-state analysis ------------------------------------------------

enum class DareSensitivity {
  kScaledIdentity,  // C = lambda * I
  kOnesRow,         // C = lambda * 1^T
};

enum class DareNoiseUnits {
  kCycles,         // R = (r / lambda) I
  kMetersSquared,  // R = r^2 I
};

struct DareConfig {
  double q = 1e-3;
  double r = 0.0;  // m
  double wavelength = 0.1905;
  int n = 10;
  DareSensitivity sensitivity = DareSensitivity::kScaledIdentity;
  DareNoiseUnits units = DareNoiseUnits::kCycles;
  int max_iterations = 1'000'000;
};

struct DareResult {
  bool bounded = true;
  int unobservable_dimension = 0;
  int iterations = 0;
  VecX prior_variances;      // diagonal of the steady-state prediction
  VecX posterior_variances;  // after the measurement update
  double success_rate = 0.0;  // closed-form product with d_i = sqrt(prior variance)
};

DareResult dare_steady_state(const DareConfig& cfg);

// ---- metrics ---------------------------------------------------------------

struct EpochRecord {
  double time = 0.0;
  Vec3 est_rel_pos = Vec3::Zero();
  Vec3 true_rel_pos = Vec3::Zero();
  Vec3 est_rel_vel = Vec3::Zero();
  Vec3 true_rel_vel = Vec3::Zero();
  Mat3 target_rtn = Mat3::Identity();  // ECI -> target RTN
  int fixed_channels = 0;
  int active_channels = 0;
};

struct NavMetrics {
  double pos_rms_pre = 0.0;   // m, epochs without a fix
  double pos_rms_post = 0.0;  // m, epochs holding at least one fix
  double vel_rms_pre = 0.0;
  double vel_rms_post = 0.0;
  Vec3 pos_mean_post = Vec3::Zero();  // RTN
  Vec3 pos_std_post = Vec3::Zero();
  int epochs_pre = 0;
  int epochs_post = 0;
  int fixes = 0;
  int wrong_fixes = 0;
  double wrong_fix_rate = 0.0;
  double mean_fixed_fraction = 0.0;  // fixed / tracked channels
};

/// Errors in target RTN. `fix_correct` holds one flag per fix event.
NavMetrics navigation_metrics(const std::vector<EpochRecord>& history,
                              const std::vector<bool>& fix_correct, double start_time = 0.0);

/// CSV snapshot: time, 71 state values, 71 standard deviations, fix mask.
void write_snapshot_header(std::ostream& os);
void write_snapshot_row(std::ostream& os, const FilterState& s);

}  // namespace cdgps::nav
