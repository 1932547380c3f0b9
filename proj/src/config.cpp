#include "cdgps/scenario.hpp"

#include <json.hpp>

#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace cdgps::sim {

using nlohmann::json;
using constants::kArcsec;
using constants::kDeg;

namespace {

// Walks a JSON object, recording every key it reads so that the remainder
// can be reported as unknown.
class Reader {
 public:
  Reader(const json& j, std::string path, std::vector<std::string>& unknown)
      : j_(j), path_(std::move(path)), unknown_(unknown) {
    if (!j_.is_object()) throw ConfigError(where("") + ": expected an object");
  }
  ~Reader() = default;

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where(key) + ": wrong type");
    }
  }

  void get_scaled(const std::string& key, double& out, double scale) {
    double v = out / scale;
    get(key, v);
    out = v * scale;
  }

  // Doubles that may be "inf" (or null) for an infinite value.
  void get_extended(const std::string& key, double& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    if (v.is_null() || (v.is_string() && v.get<std::string>() == "inf")) {
      out = nav::kInfinity;
    } else if (v.is_number()) {
      out = v.get<double>();
    } else {
      throw ConfigError(where(key) + ": expected a number or \"inf\"");
    }
  }

  void get_vec3(const std::string& key, Vec3& out, double scale = 1.0) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    if (!v.is_array() || v.size() != 3) throw ConfigError(where(key) + ": expected 3 numbers");
    for (int i = 0; i < 3; ++i) {
      if (!v[i].is_number()) throw ConfigError(where(key) + ": expected 3 numbers");
      out(i) = v[i].get<double>() * scale;
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  const json& raw(const std::string& key) const { return j_.at(key); }
  std::string child(const std::string& key) const { return where(key); }
  std::vector<std::string>& unknown() { return unknown_; }

  void finish() {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) unknown_.push_back(where(it.key()));
    }
  }

 private:
  std::string where(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  const json& j_;
  std::string path_;
  std::vector<std::string>& unknown_;
  std::set<std::string> seen_;
};

void read_elements(Reader& r, KeplerElements& el) {
  r.get("a_m", el.a);
  r.get("e", el.e);
  r.get_scaled("i_deg", el.i, kDeg);
  r.get_scaled("raan_deg", el.raan, kDeg);
  r.get_scaled("argp_deg", el.argp, kDeg);
  r.get_scaled("mean_anomaly_deg", el.mean_anomaly, kDeg);
  r.finish();
}

json elements_json(const KeplerElements& el) {
  return {{"a_m", el.a},
          {"e", el.e},
          {"i_deg", el.i / kDeg},
          {"raan_deg", el.raan / kDeg},
          {"argp_deg", el.argp / kDeg},
          {"mean_anomaly_deg", el.mean_anomaly / kDeg}};
}

json extended(double v) { return std::isinf(v) ? json("inf") : json(v); }

void with_child(Reader& parent, const std::string& key, const std::function<void(Reader&)>& fn) {
  if (!parent.has(key)) return;
  Reader r(parent.raw(key), parent.child(key), parent.unknown());
  fn(r);
  r.finish();
}

}  // namespace

ScenarioConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("<root>: expected an object");

  ScenarioConfig c;
  std::string kind = "custom";
  if (doc.contains("kind")) {
    if (!doc["kind"].is_string()) throw ConfigError("kind: wrong type");
    kind = doc["kind"].get<std::string>();
  }
  if (kind == "leo") {
    c = ScenarioConfig::leo_preset();
  } else if (kind == "geo") {
    c = ScenarioConfig::geo_preset();
  } else if (kind != "custom") {
    throw ConfigError("kind: expected leo | geo | custom, got '" + kind + "'");
  }

  std::vector<std::string> unknown;
  Reader r(doc, "", unknown);
  r.get("kind", kind);
  r.get("name", c.name);
  int64_t seed = static_cast<int64_t>(c.seed);
  r.get("seed", seed);
  if (seed < 0) throw ConfigError("seed: must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  std::string coupling = to_string(c.coupling);
  r.get("coupling", coupling);
  c.coupling = parse_coupling(coupling);

  with_child(r, "target", [&](Reader& t) {
    read_elements(t, c.target);
  });
  r.get("separation_m", c.separation);
  if (r.has("impulses")) {
    const json& arr = r.raw("impulses");
    if (!arr.is_array()) throw ConfigError("impulses: expected an array");
    c.impulses.clear();
    for (std::size_t k = 0; k < arr.size(); ++k) {
      Reader ir(arr[k], "impulses[" + std::to_string(k) + "]", unknown);
      Impulse imp;
      ir.get("time_s", imp.time);
      ir.get_vec3("dv_rtn_mps", imp.dv_rtn);
      ir.finish();
      c.impulses.push_back(imp);
    }
  }
  r.get("impulse_sigma_mps", c.impulse_sigma);
  r.get_vec3("unmodeled_accel_chief_rtn", c.unmodeled_accel_chief);
  r.get_vec3("unmodeled_accel_deputy_rtn", c.unmodeled_accel_deputy);
  r.get("truth_step_s", c.truth_step);
  r.get("gps_period_s", c.gps_period);
  r.get("external_period_s", c.external_period);
  r.get("external_enable_time_s", c.external_enable_time);
  r.get("iar_start_s", c.iar_start);
  r.get("duration_s", c.duration);
  r.get("full_duration_s", c.full_duration);
  r.get("full_length", c.full_length);
  with_child(r, "initial_error", [&](Reader& e) {
    e.get("position_m", c.initial_error_position);
    e.get("velocity_mps", c.initial_error_velocity);
  });

  with_child(r, "gps", [&](Reader& g) {
    std::string lobe = c.lobe == LobeMode::kMainlobe ? "mainlobe" : "sidelobe";
    g.get("lobe", lobe);
    if (lobe == "mainlobe") {
      c.lobe = LobeMode::kMainlobe;
    } else if (lobe == "sidelobe") {
      c.lobe = LobeMode::kSidelobe;
    } else {
      throw ConfigError("gps.lobe: expected mainlobe | sidelobe");
    }
    g.get("exclude_mainlobe", c.exclude_mainlobe);
    std::string bs = c.boresight == AntennaBoresight::kZenith ? "zenith" : "nadir";
    g.get("antenna_boresight", bs);
    if (bs == "zenith") {
      c.boresight = AntennaBoresight::kZenith;
    } else if (bs == "nadir") {
      c.boresight = AntennaBoresight::kNadir;
    } else {
      throw ConfigError("gps.antenna_boresight: expected zenith | nadir");
    }
    g.get_scaled("elevation_mask_deg", c.elevation_mask, kDeg);
    g.get("reference_c_n0_dbhz", c.reference_c_n0);
    g.get_scaled("reference_range_km", c.reference_range, 1e3);
    g.get("tracking_threshold_dbhz", c.tracking_threshold);
    g.get_scaled("mainlobe_halfcone_deg", c.constellation.mainlobe_halfcone, kDeg);
    g.get_scaled("sidelobe_halfcone_deg", c.constellation.sidelobe_halfcone, kDeg);
    g.get("occlusion_radius_m", c.constellation.occlusion_radius);
    if (g.has("satellites")) {
      const json& arr = g.raw("satellites");
      if (!arr.is_array()) throw ConfigError("gps.satellites: expected an array");
      c.constellation.satellites.clear();
      for (std::size_t k = 0; k < arr.size(); ++k) {
        Reader sr(arr[k], "gps.satellites[" + std::to_string(k) + "]", unknown);
        GpsSatellite sat;
        sr.get("prn", sat.prn);
        read_elements(sr, sat.elements);
        c.constellation.satellites.push_back(sat);
      }
    }
  });

  with_child(r, "noise", [&](Reader& n) {
    n.get("sigma_code_m", c.noise.sigma_code);
    n.get("sigma_phase_m", c.noise.sigma_phase);
    n.get("clock_walk_m_per_sqrt_s", c.noise.clock_walk);
    n.get("gps_clock_sigma_m", c.noise.gps_clock_sigma);
    n.get("ephemeris_rms_m", c.noise.ephemeris_rms);
    n.get("thermal", c.noise.thermal);
    n.get("multipath_enabled", c.noise.multipath_enabled);
    n.get("clocks", c.noise.clocks);
    n.get("ionosphere", c.noise.ionosphere);
    n.get("ephemeris", c.noise.ephemeris);
    with_child(n, "multipath", [&](Reader& m) {
      m.get("amplitude_code_m", c.noise.multipath.amplitude_code);
      m.get("amplitude_phase_m", c.noise.multipath.amplitude_phase);
      m.get("size_factor", c.noise.multipath.size_factor);
      m.get("near_field", c.noise.multipath.near_field);
      m.get("far_field", c.noise.multipath.far_field);
    });
  });

  with_child(r, "sensors", [&](Reader& s) {
    s.get("range_bias_m", c.sensors.range_bias);
    s.get_scaled("angle_bias_arcsec", c.sensors.angle_bias, kArcsec);
    s.get("range_sigma_m", c.sensors.range_sigma);
    s.get_scaled("angle_sigma_arcsec", c.sensors.angle_sigma, kArcsec);
  });

  with_child(r, "filter", [&](Reader& f) {
    auto& t = c.filter;
    f.get("init_position_m", t.init_position);
    f.get("init_velocity_mps", t.init_velocity);
    f.get_vec3("init_accel_mps2", t.init_accel);
    f.get("init_clock_m", t.init_clock);
    f.get("init_ambiguity_cycles", t.init_ambiguity);
    f.get("init_range_bias_m", t.init_range_bias);
    f.get_scaled("init_angle_bias_arcsec", t.init_angle_bias, kArcsec);
    f.get("proc_position_m", t.proc_position);
    f.get("proc_velocity_mps", t.proc_velocity);
    f.get_vec3("proc_accel_mps2", t.proc_accel);
    f.get("proc_clock_m", t.proc_clock);
    f.get("proc_ambiguity_cycles", t.proc_ambiguity);
    f.get("proc_range_bias_m", t.proc_range_bias);
    f.get_scaled("proc_angle_bias_arcsec", t.proc_angle_bias, kArcsec);
    f.get("sigma_code_m", t.sigma_code);
    f.get("sigma_phase_m", t.sigma_phase);
    f.get("elevation_weight_code_m", t.elevation_weight_code);
    f.get("elevation_weight_phase_m", t.elevation_weight_phase);
    f.get("sigma_range_m", t.sigma_range);
    f.get_scaled("sigma_angle_arcsec", t.sigma_angle, kArcsec);
    f.get_extended("tau_clock_s", t.tau_clock);
    f.get_extended("tau_accel_s", t.tau_accel);
    f.get("gate_sigma", t.gate_sigma);
    f.get("propagation_step_s", t.propagation_step);
    f.get("j2", t.j2);
  });

  with_child(r, "iar", [&](Reader& i) {
    i.get("kappa_p", c.kappa_p);
    i.get("kappa_d", c.kappa_d);
    i.get("search_step", c.search_step);
  });
  r.finish();

  if (!unknown.empty()) {
    std::string msg = "unknown configuration keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }
  if (kind == "leo") {
    c.kind = ScenarioKind::kLeo;
  } else if (kind == "geo") {
    c.kind = ScenarioKind::kGeo;
  } else {
    c.kind = ScenarioKind::kCustom;
  }
  c.validate();
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ScenarioConfig& c) {
  json j;
  j["kind"] = c.kind == ScenarioKind::kLeo ? "leo" : c.kind == ScenarioKind::kGeo ? "geo" : "custom";
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["coupling"] = to_string(c.coupling);
  j["target"] = elements_json(c.target);
  j["separation_m"] = c.separation;
  json imps = json::array();
  for (const auto& imp : c.impulses) {
    imps.push_back({{"time_s", imp.time},
                    {"dv_rtn_mps", {imp.dv_rtn.x(), imp.dv_rtn.y(), imp.dv_rtn.z()}}});
  }
  j["impulses"] = imps;
  j["impulse_sigma_mps"] = c.impulse_sigma;
  const auto v3 = [](const Vec3& v, double s = 1.0) { return json{v.x() / s, v.y() / s, v.z() / s}; };
  j["unmodeled_accel_chief_rtn"] = v3(c.unmodeled_accel_chief);
  j["unmodeled_accel_deputy_rtn"] = v3(c.unmodeled_accel_deputy);
  j["truth_step_s"] = c.truth_step;
  j["gps_period_s"] = c.gps_period;
  j["external_period_s"] = c.external_period;
  j["external_enable_time_s"] = c.external_enable_time;
  j["iar_start_s"] = c.iar_start;
  j["duration_s"] = c.duration;
  j["full_duration_s"] = c.full_duration;
  j["full_length"] = c.full_length;
  j["initial_error"] = {{"position_m", c.initial_error_position},
                        {"velocity_mps", c.initial_error_velocity}};

  json sats = json::array();
  for (const auto& s : c.constellation.satellites) {
    json e = elements_json(s.elements);
    e["prn"] = s.prn;
    sats.push_back(e);
  }
  j["gps"] = {{"lobe", c.lobe == LobeMode::kMainlobe ? "mainlobe" : "sidelobe"},
              {"exclude_mainlobe", c.exclude_mainlobe},
              {"antenna_boresight", c.boresight == AntennaBoresight::kZenith ? "zenith" : "nadir"},
              {"elevation_mask_deg", c.elevation_mask / kDeg},
              {"reference_c_n0_dbhz", c.reference_c_n0},
              {"reference_range_km", c.reference_range / 1e3},
              {"tracking_threshold_dbhz", c.tracking_threshold},
              {"mainlobe_halfcone_deg", c.constellation.mainlobe_halfcone / kDeg},
              {"sidelobe_halfcone_deg", c.constellation.sidelobe_halfcone / kDeg},
              {"occlusion_radius_m", c.constellation.occlusion_radius},
              {"satellites", sats}};

  const auto& mp = c.noise.multipath;
  j["noise"] = {{"sigma_code_m", c.noise.sigma_code},
                {"sigma_phase_m", c.noise.sigma_phase},
                {"clock_walk_m_per_sqrt_s", c.noise.clock_walk},
                {"gps_clock_sigma_m", c.noise.gps_clock_sigma},
                {"ephemeris_rms_m", c.noise.ephemeris_rms},
                {"thermal", c.noise.thermal},
                {"multipath_enabled", c.noise.multipath_enabled},
                {"clocks", c.noise.clocks},
                {"ionosphere", c.noise.ionosphere},
                {"ephemeris", c.noise.ephemeris},
                {"multipath",
                 {{"amplitude_code_m", mp.amplitude_code},
                  {"amplitude_phase_m", mp.amplitude_phase},
                  {"size_factor", mp.size_factor},
                  {"near_field", mp.near_field},
                  {"far_field", mp.far_field}}}};
  j["sensors"] = {{"range_bias_m", c.sensors.range_bias},
                  {"angle_bias_arcsec", c.sensors.angle_bias / kArcsec},
                  {"range_sigma_m", c.sensors.range_sigma},
                  {"angle_sigma_arcsec", c.sensors.angle_sigma / kArcsec}};
  const auto& t = c.filter;
  j["filter"] = {{"init_position_m", t.init_position},
                 {"init_velocity_mps", t.init_velocity},
                 {"init_accel_mps2", v3(t.init_accel)},
                 {"init_clock_m", t.init_clock},
                 {"init_ambiguity_cycles", t.init_ambiguity},
                 {"init_range_bias_m", t.init_range_bias},
                 {"init_angle_bias_arcsec", t.init_angle_bias / kArcsec},
                 {"proc_position_m", t.proc_position},
                 {"proc_velocity_mps", t.proc_velocity},
                 {"proc_accel_mps2", v3(t.proc_accel)},
                 {"proc_clock_m", t.proc_clock},
                 {"proc_ambiguity_cycles", t.proc_ambiguity},
                 {"proc_range_bias_m", t.proc_range_bias},
                 {"proc_angle_bias_arcsec", t.proc_angle_bias / kArcsec},
                 {"sigma_code_m", t.sigma_code},
                 {"sigma_phase_m", t.sigma_phase},
                 {"elevation_weight_code_m", t.elevation_weight_code},
                 {"elevation_weight_phase_m", t.elevation_weight_phase},
                 {"sigma_range_m", t.sigma_range},
                 {"sigma_angle_arcsec", t.sigma_angle / kArcsec},
                 {"tau_clock_s", extended(t.tau_clock)},
                 {"tau_accel_s", extended(t.tau_accel)},
                 {"gate_sigma", t.gate_sigma},
                 {"propagation_step_s", t.propagation_step},
                 {"j2", t.j2}};
  j["iar"] = {{"kappa_p", c.kappa_p}, {"kappa_d", c.kappa_d}, {"search_step", c.search_step}};
  return j.dump(2);
}

}  // namespace cdgps::sim
