#pragma once

// End-to-end rendezvous simulation: truth generation, GPS and external
// sensor synthesis, the filter/IAR loop and the run report.

#include "cdgps/common.hpp"
#include "cdgps/error_models.hpp"
#include "cdgps/iar.hpp"
#include "cdgps/measurements.hpp"
#include "cdgps/nav_filter.hpp"
#include "cdgps/orbit.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace cdgps::sim {

enum class ScenarioKind { kLeo, kGeo, kCustom };
enum class CouplingMode { kNone, kLoose, kFull };
enum class AntennaBoresight { kZenith, kNadir };

struct Impulse {
  double time = 0.0;
  Vec3 dv_rtn = Vec3::Zero();  // chief RTN, m/s
};

struct NoiseConfig {
  double sigma_code = 0.20;    // thermal, m
  double sigma_phase = 0.002;  // thermal, m
  errors::MultipathParams multipath;
  double clock_walk = 1.0;       // m per sqrt(s)
  double gps_clock_sigma = 1.0;  // m, constant per satellite
  double ephemeris_rms = 1.5;    // m
  bool thermal = true;
  bool multipath_enabled = true;
  bool clocks = true;
  bool ionosphere = true;
  bool ephemeris = true;
};

// External sensor noise budget. Biases are treated as calibrated:
// the truth carries them and the filter starts from the same values.
struct SensorBudget {
  double range_bias = 0.050;
  double angle_bias = 500.0 * constants::kArcsec;
  double range_sigma = 0.005;
  double angle_sigma = 100.0 * constants::kArcsec;
};

struct ScenarioConfig {
  std::string name = "custom";
  ScenarioKind kind = ScenarioKind::kCustom;

  KeplerElements target;        // deputy
  double separation = 1000.0;   // chaser trails the target along-track, m
  std::vector<Impulse> impulses;
  double impulse_sigma = 5e-4;  // m/s per axis, execution error
  Vec3 unmodeled_accel_chief = Vec3::Zero();   // own RTN, m/s^2
  Vec3 unmodeled_accel_deputy = Vec3::Zero();

  double truth_step = 10.0;
  double gps_period = 30.0;
  double external_period = 10.0;
  double external_enable_time = 1800.0;
  double iar_start = 1800.0;
  double duration = 0.0;
  double full_duration = 0.0;
  bool full_length = false;

  double initial_error_position = 10.0;   // m per axis
  double initial_error_velocity = 0.01;   // m/s per axis

  LobeMode lobe = LobeMode::kMainlobe;
  bool exclude_mainlobe = false;
  AntennaBoresight boresight = AntennaBoresight::kZenith;
  double elevation_mask = 0.0;       // rad above the antenna plane
  double reference_c_n0 = 45.0;      // dB-Hz at reference_range
  double reference_range = 20'000e3; // m
  double tracking_threshold = 15.0;  // dB-Hz
  GpsConstellation constellation = GpsConstellation::nominal();

  NoiseConfig noise;
  SensorBudget sensors;
  nav::FilterTuning filter;

  CouplingMode coupling = CouplingMode::kFull;
  double kappa_p = 0.99;
  double kappa_d = 3.0;
  int search_step = 2;
  std::uint64_t seed = 1;

  double effective_duration() const { return full_length ? full_duration : duration; }
  /// Throws ConfigError naming the offending field.
  void validate() const;

  static ScenarioConfig leo_preset();
  static ScenarioConfig geo_preset();
};

std::string to_string(CouplingMode m);
CouplingMode parse_coupling(const std::string& s);

/// JSON parsing on top of the preset named by "kind". Unknown keys are
/// rejected with a ConfigError listing all of them.
ScenarioConfig parse_config(const std::string& json_text);
ScenarioConfig load_config(const std::string& path);
/// Fully resolved configuration as pretty-printed JSON.
std::string config_to_json(const ScenarioConfig& cfg);

struct Event {
  double time = 0.0;
  std::string kind;
  std::string detail;
};

struct TruthEpoch {
  double time = 0.0;
  OrbitState chief;
  OrbitState deputy;
  double clock_chief = 0.0;  // m
  double clock_deputy = 0.0;
};

struct Truth {
  std::vector<TruthEpoch> epochs;  // every truth_step seconds
  std::vector<Event> events;
  std::vector<Vec3> executed_dv_rtn;  // per scheduled impulse
};

/// Chaser (chief) and target (deputy) trajectories with impulses and clocks.
Truth generate_truth(const ScenarioConfig& cfg, errors::RngStreams& rng);

/// One synthesized epoch plus the truth needed to score it.
struct SyntheticEpoch {
  MeasurementEpoch meas;
  std::map<int, std::int64_t> truth_sd;  // prn -> N_chief - N_deputy
  std::map<int, double> c_n0;            // prn -> chief C/N0
  std::map<int, double> off_boresight;   // prn -> transmitter off-boresight, rad
  bool gps = false;
};

std::vector<SyntheticEpoch> synthesize_measurements(const Truth& truth,
                                                    const ScenarioConfig& cfg,
                                                    errors::RngStreams& rng);

/// Lengths [s] of every continuous SD track in the stream.
std::vector<double> track_lengths(const std::vector<SyntheticEpoch>& epochs,
                                  double gps_period);

/// (k-1) x k matrix differencing every entry against `reference`.
MatX differencing_matrix(int k, int reference);

/// DD distribution from SD floats and covariance. Throws
/// InsufficientChannelsError below two channels.
iar::AmbiguityDistribution sd_to_dd(const VecX& sd_floats, const MatX& sd_covariance,
                                    int reference);

struct FixEvent {
  double time = 0.0;
  std::vector<int> prns;           // unfixed channels searched, reference last
  std::vector<int> indices;        // accepted rows in decorrelated space
  std::vector<std::int64_t> values;
  std::vector<std::int64_t> truth;
  bool correct = true;
  double success_prob = 0.0;
  std::string search;  // "constrained" or "classical"
};

struct EpochRow {
  double time = 0.0;
  Vec3 pos_err_rtn = Vec3::Zero();
  Vec3 vel_err_rtn = Vec3::Zero();
  Vec3 pos_sigma_rtn = Vec3::Zero();
  Vec3 vel_sigma_rtn = Vec3::Zero();
  int active_channels = 0;
  int fixed_channels = 0;
  double fixed_fraction = 0.0;
  double success_prob = 0.0;
  int rejected_rows = 0;
  std::string pipeline;  // stage letters in execution order
};

struct RunReport {
  std::string config_json;
  std::uint64_t seed = 0;
  std::vector<EpochRow> rows;
  std::vector<FixEvent> fixes;
  std::vector<Event> events;
  nav::NavMetrics metrics;
  double time_first_fix = -1.0;  // s, -1 if none
  int epochs = 0;
  int skipped_epochs = 0;
  bool degraded = false;
  double mean_track_length = 0.0;
};

RunReport run_scenario(const ScenarioConfig& cfg);

/// Per-epoch CSV at full precision.
void write_csv(std::ostream& os, const RunReport& report);
/// Summary metrics, events, fixes, config echo and seed.
void write_json(std::ostream& os, const RunReport& report);
/// Human-readable summary rounded to 4 significant figures.
std::string summary_text(const RunReport& report);

}  // namespace cdgps::sim
