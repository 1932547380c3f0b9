#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cdgps::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kValidation = 1;
inline constexpr int kRuntime = 2;

struct RunOptions {
  std::string config_path;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> coupling;
  std::optional<double> duration;
  bool full_length = false;
};

struct SweepOptions {
  RunOptions run;
  int seeds = 5;
  std::uint64_t first_seed = 1;
  int jobs = 1;
};

struct DareOptions {
  double q = 1e-3;
  std::vector<double> r;  // m; empty means lambda/4, lambda/8, lambda/40
  int n = 10;
  double wavelength = 0.0;  // 0 means the rounded L1 value 0.1905 m
  std::string sensitivity = "identity";
  std::string units = "cycles";
  std::vector<double> d;  // direct mode: per-ambiguity standard deviations
};

struct LinkBudgetOptions {
  std::optional<double> slant_range_km;
  double rx_gain_delta = 0.0;
  bool atmospheric = false;
};

struct MultipathMapOptions {
  std::string output_dir;
  std::string config_path;  // optional source of multipath parameters
  double step_deg = 5.0;
  std::optional<double> amplitude_phase;
  std::optional<double> size_factor;
  std::optional<double> target_azimuth_deg;
  std::optional<double> target_elevation_deg;
  std::optional<double> target_range;
};

/// Default output directory: $CDGPS_OUTPUT_DIR, else "cdgps_out".
std::string default_output_dir();

int cmd_run(const RunOptions& o, std::ostream& out, std::ostream& err);
int cmd_sweep(const SweepOptions& o, std::ostream& out, std::ostream& err);
int cmd_dare(const DareOptions& o, std::ostream& out, std::ostream& err);
int cmd_link_budget(const LinkBudgetOptions& o, std::ostream& out, std::ostream& err);
int cmd_multipath_map(const MultipathMapOptions& o, std::ostream& out, std::ostream& err);

}  // namespace cdgps::cli
