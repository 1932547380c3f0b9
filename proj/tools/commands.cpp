#include "commands.hpp"

#include "cdgps/error_models.hpp"
#include "cdgps/iar.hpp"
#include "cdgps/nav_filter.hpp"
#include "cdgps/scenario.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <ostream>
#include <sstream>

namespace cdgps::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void error_summary(std::ostream& err, const std::string& kind, const std::string& msg) {
  err << json{{"status", "error"}, {"kind", kind}, {"message", msg}}.dump() << '\n';
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Files are staged in memory and only written once everything succeeded.
struct Staged {
  std::map<std::string, std::string> files;

  void commit(const std::string& dir) const {
    fs::create_directories(dir);
    for (const auto& [name, text] : files) {
      std::ofstream o(fs::path(dir) / name, std::ios::binary);
      if (!o) throw Error("cannot write " + (fs::path(dir) / name).string());
      o << text;
    }
  }
};

sim::ScenarioConfig resolve(const RunOptions& o) {
  if (o.config_path.empty()) throw ConfigError("--config is required");
  sim::ScenarioConfig cfg = sim::load_config(o.config_path);
  if (o.seed) cfg.seed = *o.seed;
  if (o.coupling) cfg.coupling = sim::parse_coupling(*o.coupling);
  if (o.full_length) cfg.full_length = true;
  if (o.duration) {
    cfg.duration = *o.duration;
    cfg.full_length = false;
  }
  cfg.validate();
  return cfg;
}

std::string stem(const sim::ScenarioConfig& cfg) {
  return cfg.name + "_" + sim::to_string(cfg.coupling) + "_seed" + std::to_string(cfg.seed);
}

void stage_run(Staged& st, const sim::ScenarioConfig& cfg, const sim::RunReport& r) {
  std::ostringstream csv, js;
  sim::write_csv(csv, r);
  sim::write_json(js, r);
  st.files[stem(cfg) + ".csv"] = csv.str();
  st.files[stem(cfg) + ".json"] = js.str();
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    error_summary(err, "validation", e.what());
    return kValidation;
  } catch (const std::exception& e) {
    error_summary(err, "runtime", e.what());
    return kRuntime;
  }
}

}  // namespace

std::string default_output_dir() {
  const char* env = std::getenv("CDGPS_OUTPUT_DIR");
  return env && *env ? env : "cdgps_out";
}

int cmd_run(const RunOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const sim::ScenarioConfig cfg = resolve(o);
    const sim::RunReport r = sim::run_scenario(cfg);
    Staged st;
    st.files[stem(cfg) + "_config.json"] = sim::config_to_json(cfg) + "\n";
    stage_run(st, cfg, r);
    const std::string dir = o.output_dir.empty() ? default_output_dir() : o.output_dir;
    st.commit(dir);
    out << cfg.name << " (" << sim::to_string(cfg.coupling) << ") "
        << sim::summary_text(r) << "reports written to " << dir << "\n";
    return kOk;
  });
}

int cmd_sweep(const SweepOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (o.seeds < 1) throw ConfigError("--seeds must be >= 1");
    if (o.jobs < 1) throw ConfigError("--jobs must be >= 1");
    const sim::ScenarioConfig base = resolve(o.run);
    std::vector<sim::ScenarioConfig> cfgs;
    for (int k = 0; k < o.seeds; ++k) {
      sim::ScenarioConfig c = base;
      c.seed = o.first_seed + static_cast<std::uint64_t>(k);
      cfgs.push_back(c);
    }
    std::vector<sim::RunReport> reports(cfgs.size());
    for (std::size_t start = 0; start < cfgs.size(); start += static_cast<std::size_t>(o.jobs)) {
      std::vector<std::future<sim::RunReport>> fut;
      const std::size_t end = std::min(cfgs.size(), start + static_cast<std::size_t>(o.jobs));
      for (std::size_t k = start; k < end; ++k) {
        fut.push_back(std::async(std::launch::async, [&cfgs, k] { return sim::run_scenario(cfgs[k]); }));
      }
      for (std::size_t k = start; k < end; ++k) reports[k] = fut[k - start].get();
    }

    Staged st;
    st.files[base.name + "_" + sim::to_string(base.coupling) + "_config.json"] =
        sim::config_to_json(base) + "\n";
    json rows = json::array();
    int events = 0, wrong = 0;
    for (std::size_t k = 0; k < cfgs.size(); ++k) {
      const auto& r = reports[k];
      stage_run(st, cfgs[k], r);
      events += r.metrics.fixes;
      wrong += r.metrics.wrong_fixes;
      rows.push_back({{"seed", cfgs[k].seed},
                      {"fix_events", r.metrics.fixes},
                      {"wrong_fix_events", r.metrics.wrong_fixes},
                      {"time_first_fix_s", r.time_first_fix},
                      {"pos_rms_pre_m", r.metrics.pos_rms_pre},
                      {"pos_rms_post_m", r.metrics.pos_rms_post},
                      {"degraded", r.degraded}});
      out << sim::summary_text(r);
    }
    const double rate = events > 0 ? static_cast<double>(wrong) / events : 0.0;
    json summary{{"runs", rows}, {"fix_events", events}, {"wrong_fix_events", wrong},
                 {"wrong_fix_rate", rate}};
    st.files[base.name + "_" + sim::to_string(base.coupling) + "_sweep.json"] = summary.dump(2) + "\n";
    const std::string dir = o.run.output_dir.empty() ? default_output_dir() : o.run.output_dir;
    st.commit(dir);
    out << "sweep: " << cfgs.size() << " runs, " << events << " fix events, wrong-fix rate "
        << fmt("%.4g", rate) << "\n";
    return kOk;
  });
}

int cmd_dare(const DareOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const double lam = o.wavelength > 0.0 ? o.wavelength : nav::DareConfig{}.wavelength;
    if (o.wavelength < 0.0) throw ConfigError("--wavelength must be positive");
    if (o.n < 1) throw ConfigError("--n must be >= 1");
    if (!o.d.empty()) {
      VecX d(static_cast<Eigen::Index>(o.d.size()));
      for (std::size_t i = 0; i < o.d.size(); ++i) {
        if (!(o.d[i] > 0.0)) throw ConfigError("--d values must be > 0");
        d(static_cast<Eigen::Index>(i)) = o.d[i];
      }
      if (o.n > d.size() && d.size() != 1) throw ConfigError("--n exceeds the number of --d values");
      VecX all = d.size() == 1 ? VecX::Constant(o.n, d(0)) : d;
      const double p = iar::success_rate(all, o.n);
      out << "direct success rate over " << o.n << " ambiguities: " << fmt("%.4g", p) << "\n";
      return kOk;
    }
    std::vector<double> rs = o.r;
    std::vector<std::string> labels;
    if (rs.empty()) {
      rs = {lam / 4.0, lam / 8.0, lam / 40.0};
      labels = {"lambda/4", "lambda/8", "lambda/40"};
    }
    for (std::size_t i = labels.size(); i < rs.size(); ++i) labels.push_back(fmt("%.6g m", rs[i]));
    nav::DareConfig cfg;
    cfg.q = o.q;
    cfg.n = o.n;
    cfg.wavelength = lam;
    if (o.sensitivity == "identity") {
      cfg.sensitivity = nav::DareSensitivity::kScaledIdentity;
    } else if (o.sensitivity == "ones") {
      cfg.sensitivity = nav::DareSensitivity::kOnesRow;
    } else {
      throw ConfigError("--sensitivity: expected identity | ones");
    }
    if (o.units == "cycles") {
      cfg.units = nav::DareNoiseUnits::kCycles;
    } else if (o.units == "m2") {
      cfg.units = nav::DareNoiseUnits::kMetersSquared;
    } else {
      throw ConfigError("--units: expected cycles | m2");
    }
    for (const double r : rs) {
      if (!(r > 0.0)) throw ConfigError("--r values must be > 0");
    }
    out << "steady-state IAR success rate, q = " << fmt("%.3g", cfg.q) << ", n = " << cfg.n
        << ", C = " << (o.sensitivity == "identity" ? "lambda*I" : "lambda*1^T")
        << ", R = " << (o.units == "cycles" ? "(r/lambda)*I" : "r^2*I") << "\n";
    out << "R            computed    reference\n";
    const bool defaults = o.r.empty() && o.n == 10 && lam == nav::DareConfig{}.wavelength && o.q == 1e-3;
    const double reference[3] = {28.17, 51.79, 95.41};
    for (std::size_t i = 0; i < rs.size(); ++i) {
      cfg.r = rs[i];
      const nav::DareResult res = nav::dare_steady_state(cfg);
      std::string computed = res.bounded ? fmt("%8.2f %%", 100.0 * res.success_rate)
                                         : "unbounded (" + std::to_string(res.unobservable_dimension) +
                                               " unobservable)";
      std::string ref = defaults && i < 3 ? fmt("%8.2f %%", reference[i]) : "       -";
      char line[160];
      std::snprintf(line, sizeof line, "%-12s %-11s %s\n", labels[i].c_str(), computed.c_str(),
                    ref.c_str());
      out << line;
    }
    return kOk;
  });
}

int cmd_link_budget(const LinkBudgetOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    struct Column {
      const char* name;
      errors::LinkBudget b;
      double ref_fspl, ref_c, ref_cn0, ref_code, ref_phase_mm, ref_eirp;
    };
    std::vector<Column> cols = {
        {"LEO", errors::LinkBudget::leo(), -182.419, -124.919, 45.0, 0.20, 2.0, 26.5},
        {"GEO", errors::LinkBudget::geo(), -194.460, -153.460, 16.45, 2.673, 21.274, 10.0}};
    if (o.slant_range_km && !(*o.slant_range_km > 0.0)) throw ConfigError("--slant-range must be > 0");
    const bool modified = o.slant_range_km.has_value() || o.rx_gain_delta != 0.0 || o.atmospheric;
    for (auto& c : cols) {
      if (o.slant_range_km) c.b.slant_range_km = *o.slant_range_km;
      c.b.rx_antenna_gain += o.rx_gain_delta;
      c.b.apply_atmospheric_loss = o.atmospheric;
    }
    char line[200];
    std::snprintf(line, sizeof line, "%-26s %12s %12s\n", "parameter", cols[0].name, cols[1].name);
    out << line;
    int flagged = 0;
    auto row = [&](const char* name, double a, double b, double ra, double rb, double tol) {
      std::string mark;
      if (!modified && tol > 0.0 && (std::abs(a - ra) > tol || std::abs(b - rb) > tol)) {
        mark = "  <-- deviates from reference";
        ++flagged;
      }
      std::snprintf(line, sizeof line, "%-26s %12.3f %12.3f%s\n", name, a, b, mark.c_str());
      out << line;
    };
    std::vector<errors::LinkBudgetRows> r;
    for (const auto& c : cols) r.push_back(errors::evaluate(c.b));
    row("frequency [MHz]", cols[0].b.frequency_mhz, cols[1].b.frequency_mhz, 0, 0, 0);
    row("PLL bandwidth [Hz]", cols[0].b.pll_bandwidth_hz, cols[1].b.pll_bandwidth_hz, 0, 0, 0);
    row("RX antenna gain [dB]", cols[0].b.rx_antenna_gain, cols[1].b.rx_antenna_gain, 0, 0, 0);
    row("RX circuit loss [dB]", cols[0].b.rx_circuit_loss, cols[1].b.rx_circuit_loss, 0, 0, 0);
    row("RX polarization loss [dB]", cols[0].b.rx_polarization_loss, cols[1].b.rx_polarization_loss, 0, 0, 0);
    row("GPS antenna gain [dB]", cols[0].b.gps_antenna_gain, cols[1].b.gps_antenna_gain, 0, 0, 0);
    row("GPS transmit power [dBW]", cols[0].b.gps_transmit_power, cols[1].b.gps_transmit_power, 0, 0, 0);
    row("GPS transmit loss [dB]", cols[0].b.gps_transmit_loss, cols[1].b.gps_transmit_loss, 0, 0, 0);
    row("GPS EIRP [dBW]", r[0].eirp, r[1].eirp, cols[0].ref_eirp, cols[1].ref_eirp, 0.2);
    row("slant range [km]", cols[0].b.slant_range_km, cols[1].b.slant_range_km, 0, 0, 0);
    row("free-space loss [dB]", r[0].fspl, r[1].fspl, cols[0].ref_fspl, cols[1].ref_fspl, 0.2);
    row("atmospheric loss [dB]", cols[0].b.atmospheric_loss, cols[1].b.atmospheric_loss, 0, 0, 0);
    row("N0 [dBW/Hz]", r[0].noise_density, r[1].noise_density, -169.919, -169.919, 0.2);
    row("C [dBW]", r[0].carrier, r[1].carrier, cols[0].ref_c, cols[1].ref_c, 0.2);
    row("C/N0 [dB-Hz]", r[0].c_n0, r[1].c_n0, cols[0].ref_cn0, cols[1].ref_cn0, 0.2);
    const errors::ThermalModel model = errors::ThermalModel::anchored_leo();
    double sig[2][2];
    for (int k = 0; k < 2; ++k) {
      try {
        const auto s = errors::thermal_noise_sigmas(r[k].c_n0, cols[k].b.pll_bandwidth_hz,
                                                    constants::kL1Wavelength, model);
        sig[k][0] = s.code;
        sig[k][1] = s.phase * 1e3;
      } catch (const LossOfLockError&) {
        sig[k][0] = sig[k][1] = std::nan("");
      }
    }
    std::snprintf(line, sizeof line, "%-26s %12.3f %12.3f   (reference %.3f / %.3f)\n",
                  "sigma code [m]", sig[0][0], sig[1][0], cols[0].ref_code, cols[1].ref_code);
    out << line;
    std::snprintf(line, sizeof line, "%-26s %12.3f %12.3f   (reference %.3f / %.3f)\n",
                  "sigma phase [mm]", sig[0][1], sig[1][1], cols[0].ref_phase_mm, cols[1].ref_phase_mm);
    out << line;
    if (!modified) {
      out << (flagged == 0 ? "all dB rows within 0.2 dB of the reference table\n"
                           : std::to_string(flagged) + " row(s) deviate by more than 0.2 dB\n");
    }
    return kOk;
  });
}

int cmd_multipath_map(const MultipathMapOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    errors::MultipathParams p = sim::ScenarioConfig::leo_preset().noise.multipath;
    p.target_range = 50.0;
    if (!o.config_path.empty()) {
      p = sim::load_config(o.config_path).noise.multipath;
      p.target_range = 50.0;
    }
    if (o.amplitude_phase) p.amplitude_phase = *o.amplitude_phase;
    if (o.size_factor) p.size_factor = *o.size_factor;
    if (o.target_azimuth_deg) p.target_azimuth = *o.target_azimuth_deg * constants::kDeg;
    if (o.target_elevation_deg) p.target_elevation = *o.target_elevation_deg * constants::kDeg;
    if (o.target_range) p.target_range = *o.target_range;
    if (!(o.step_deg > 0.0)) throw ConfigError("--step must be > 0");
    if (!(p.target_range > 0.0)) throw ConfigError("--range must be > 0");
    p.validate();
    std::ostringstream csv;
    errors::write_multipath_map(csv, p, o.step_deg);
    Staged st;
    st.files["multipath_map.csv"] = csv.str();
    const std::string dir = o.output_dir.empty() ? default_output_dir() : o.output_dir;
    st.commit(dir);
    out << "multipath map written to " << (fs::path(dir) / "multipath_map.csv").string() << "\n";
    return kOk;
  });
}

}  // namespace cdgps::cli
