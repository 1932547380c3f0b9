#pragma once

// Measurement error generation: link budget and thermal noise, near/far
// multipath, receiver clock walk, Klobuchar ionosphere and ROE-based
// broadcast ephemeris error. Random draws come from RngStreams.

#include "cdgps/common.hpp"
#include "cdgps/orbit.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <random>

namespace cdgps::errors {

/// One seeded generator per scenario, split into independent substreams.
class RngStreams {
 public:
  enum class Stream : std::uint64_t {
    kThermal = 1,
    kMultipath,
    kClock,
    kEphemeris,
    kAmbiguity,
    kExternal,
    kManeuver,
    kInitialError,
    kGpsClock,
  };

  explicit RngStreams(std::uint64_t seed);
  std::mt19937_64& stream(Stream s);
  double normal(Stream s, double sigma = 1.0);
  double uniform(Stream s, double lo, double hi);

 private:
  std::array<std::mt19937_64, 10> engines_;
};

// All dB quantities signed as in the table (losses negative).
struct LinkBudget {
  double frequency_mhz = 1575.42;
  double pll_bandwidth_hz = 15.0;
  double rx_antenna_gain = 33.0;
  double rx_circuit_loss = -1.0;
  double rx_polarization_loss = -1.0;
  double gps_antenna_gain = 13.5;
  double gps_transmit_power = 14.25;
  double gps_transmit_loss = -1.25;
  double slant_range_km = 20'000.0;
  double atmospheric_loss = -0.10;
  double noise_spectral_density = -169.919;  // dBW/Hz
  // The reference table lists the atmospheric loss but leaves it out of C.
  bool apply_atmospheric_loss = false;

  static LinkBudget leo();
  static LinkBudget geo();
  double gps_eirp() const;
};

struct LinkBudgetRows {
  double eirp = 0.0;
  double fspl = 0.0;
  double carrier = 0.0;
  double noise_density = 0.0;
  double c_n0 = 0.0;
};

/// -20 log10(4 pi d / lambda), d in km, f in MHz.
double free_space_path_loss(double range_km, double freq_mhz);
LinkBudgetRows evaluate(const LinkBudget& budget);
double carrier_to_noise(const LinkBudget& budget);

struct ThermalModel {
  double integration_time = 0.020;  // s
  double dll_bandwidth_hz = 15.0;
  double correlator_spacing = 1.0;  // chips
  double chip_length = constants::kSpeedOfLight / 1.023e6;
  double tracking_threshold = 15.0;  // dB-Hz
  // Calibration gains; the defaults anchor 45 dB-Hz to 0.20 m / 2.0 mm.
  double code_gain = 1.0;
  double phase_gain = 1.0;

  /// Sets both gains so that (c_n0, pll_bw) yields the two anchors.
  void calibrate(double c_n0, double pll_bw, double wavelength, double sigma_code,
                 double sigma_phase);
  static ThermalModel anchored_leo();
};

struct ThermalSigmas {
  double code = 0.0;   // m
  double phase = 0.0;  // m
};

/// DLL/PLL thermal noise. Throws LossOfLockError below the tracking threshold.
ThermalSigmas thermal_noise_sigmas(double c_n0, double pll_bw, double wavelength,
                                   const ThermalModel& model = ThermalModel::anchored_leo());

enum class MultipathKind { kCode, kPhase };

struct MultipathParams {
  double amplitude_code = 0.0;   // m
  double amplitude_phase = 0.0;  // m
  double size_factor = 1.0;
  double target_azimuth = 0.0;    // rad
  double target_elevation = 0.0;  // rad
  double target_range = 0.0;      // m
  bool near_field = true;
  bool far_field = true;

  void validate() const;
};

double near_field_multipath(double amplitude, double elevation_q);
double far_field_multipath(double amplitude, double size_factor, double range,
                           double d_azimuth, double d_elevation);
/// Standard deviation of the multipath error for a signal arriving at
/// (azimuth_q, elevation_q).
double multipath_sigma(const MultipathParams& params, double azimuth_q, double elevation_q,
                       MultipathKind kind);

/// CSV grid (azimuth, elevation, sigma_phase), angles in degrees.
void write_multipath_map(std::ostream& os, const MultipathParams& params, double step_deg);

double clock_random_walk(double state, double dt, double sigma_per_sqrt_s, RngStreams& rng);

using KlobucharCoefficients = std::array<double, 8>;  // alpha0..3, beta0..3
KlobucharCoefficients default_klobuchar();

/// Slant delay [m] for a receiver at `receiver_eci` looking along `los_eci`.
/// Elevations below the local horizontal are clamped to zero.
double klobuchar_delay(const Vec3& receiver_eci, const Vec3& los_eci, double time_of_day,
                       const KlobucharCoefficients& coeffs);

// Near-circular ROE: (da, dlambda, dex, dey, dix, diy).
using RoeVector = std::array<double, 6>;

struct RoeError {
  RoeVector roe{};
  double target_rms = 1.5;  // m
};

/// First-order RTN position error [m] for argument of latitude `u`.
Vec3 roe_rtn_error(const RoeVector& roe, double a, double u);
/// RMS of the RTN error over one orbit, by numerical averaging.
double roe_rms(const RoeVector& roe, double a);
/// Scales `pattern` (with its drift element zeroed) to `target_rms`.
RoeError calibrate_roe(RoeVector pattern, double a, double target_rms);
/// Random calibrated ROE corruption with zero along-track drift.
RoeError random_roe_error(RngStreams& rng, double a, double target_rms);

/// Broadcast (corrupted) ECI position of a satellite at time t.
Vec3 inject_roe_error(const KeplerElements& true_eph, const RoeError& roe, double t);

}  // namespace cdgps::errors
