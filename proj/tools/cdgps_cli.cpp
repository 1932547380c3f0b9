// cdgps: scenario runs, seed sweeps and the steady-state / link-budget
// analyses from the command line.

#include "commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace cdgps::cli;
  CLI::App app{"CDGPS relative navigation simulator"};
  app.require_subcommand(1);

  RunOptions run;
  auto add_run_flags = [](CLI::App* c, RunOptions& o) {
    c->add_option("--config", o.config_path, "scenario JSON")->required();
    c->add_option("--output-dir", o.output_dir, "output directory (default $CDGPS_OUTPUT_DIR or cdgps_out)");
    c->add_option("--seed", o.seed, "seed override");
    c->add_option("--coupling", o.coupling, "none | loose | full");
    c->add_option("--duration", o.duration, "duration override [s]");
    c->add_flag("--full-length", o.full_length, "use the full-length duration");
  };
  auto* c_run = app.add_subcommand("run", "run one scenario");
  add_run_flags(c_run, run);

  SweepOptions sweep;
  auto* c_sweep = app.add_subcommand("sweep", "run a scenario over consecutive seeds");
  add_run_flags(c_sweep, sweep.run);
  c_sweep->add_option("--seeds", sweep.seeds, "number of seeds");
  c_sweep->add_option("--first-seed", sweep.first_seed, "first seed");
  c_sweep->add_option("--jobs", sweep.jobs, "concurrent runs");

  DareOptions dare;
  auto* c_dare = app.add_subcommand("dare", "steady-state success rates from the DARE");
  c_dare->add_option("--q", dare.q, "process noise");
  c_dare->add_option("--r", dare.r, "measurement noise values [m]");
  c_dare->add_option("--n", dare.n, "number of ambiguities");
  c_dare->add_option("--wavelength", dare.wavelength, "carrier wavelength [m]");
  c_dare->add_option("--sensitivity", dare.sensitivity, "identity | ones");
  c_dare->add_option("--units", dare.units, "cycles | m2");
  c_dare->add_option("--d", dare.d, "direct mode: per-ambiguity standard deviations [cycles]");

  LinkBudgetOptions lb;
  auto* c_lb = app.add_subcommand("link-budget", "L1 link budget and thermal noise");
  c_lb->add_option("--slant-range", lb.slant_range_km, "slant range override [km]");
  c_lb->add_option("--rx-gain", lb.rx_gain_delta, "receive gain change [dB]");
  c_lb->add_flag("--atmospheric", lb.atmospheric, "include the atmospheric loss in C");

  MultipathMapOptions mp;
  auto* c_mp = app.add_subcommand("multipath-map", "carrier multipath sigma over the sensor sphere");
  c_mp->add_option("--output-dir", mp.output_dir, "output directory");
  c_mp->add_option("--config", mp.config_path, "scenario JSON for the multipath parameters");
  c_mp->add_option("--step", mp.step_deg, "grid step [deg]");
  c_mp->add_option("--amplitude-phase", mp.amplitude_phase, "phase amplitude [m]");
  c_mp->add_option("--size-factor", mp.size_factor, "far-field size factor");
  c_mp->add_option("--target-az", mp.target_azimuth_deg, "target azimuth [deg]");
  c_mp->add_option("--target-el", mp.target_elevation_deg, "target elevation [deg]");
  c_mp->add_option("--range", mp.target_range, "target range [m]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  if (*c_run) return cmd_run(run, std::cout, std::cerr);
  if (*c_sweep) return cmd_sweep(sweep, std::cout, std::cerr);
  if (*c_dare) return cmd_dare(dare, std::cout, std::cerr);
  if (*c_lb) return cmd_link_budget(lb, std::cout, std::cerr);
  if (*c_mp) return cmd_multipath_map(mp, std::cout, std::cerr);
  return kValidation;
}
