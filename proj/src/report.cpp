#include "cdgps/scenario.hpp"

#include <json.hpp>

#include <cstdio>
#include <ostream>
#include <sstream>

namespace cdgps::sim {

using nlohmann::json;

namespace {

std::string full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string sig4(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

json vec(const Vec3& v) { return json{v.x(), v.y(), v.z()}; }

}  // namespace

void write_csv(std::ostream& os, const RunReport& r) {
  os << "time,err_r,err_t,err_n,verr_r,verr_t,verr_n,sig_r,sig_t,sig_n,vsig_r,vsig_t,vsig_n,"
        "active,fixed,iar_fixed_fraction,iar_success_prob,rejected,pipeline\n";
  for (const auto& row : r.rows) {
    os << full(row.time);
    for (const Vec3* v : {&row.pos_err_rtn, &row.vel_err_rtn, &row.pos_sigma_rtn, &row.vel_sigma_rtn}) {
      for (int i = 0; i < 3; ++i) os << ',' << full((*v)(i));
    }
    os << ',' << row.active_channels << ',' << row.fixed_channels << ',' << full(row.fixed_fraction)
       << ',' << full(row.success_prob) << ',' << row.rejected_rows << ',' << row.pipeline << '\n';
  }
}

void write_json(std::ostream& os, const RunReport& r) {
  const auto& m = r.metrics;
  json j;
  j["seed"] = r.seed;
  j["metrics"] = {{"pos_rms_pre_m", m.pos_rms_pre},
                  {"pos_rms_post_m", m.pos_rms_post},
                  {"vel_rms_pre_mps", m.vel_rms_pre},
                  {"vel_rms_post_mps", m.vel_rms_post},
                  {"pos_mean_post_rtn_m", vec(m.pos_mean_post)},
                  {"pos_std_post_rtn_m", vec(m.pos_std_post)},
                  {"epochs_pre", m.epochs_pre},
                  {"epochs_post", m.epochs_post},
                  {"fix_events", m.fixes},
                  {"wrong_fix_events", m.wrong_fixes},
                  {"wrong_fix_rate", m.wrong_fix_rate},
                  {"mean_fixed_fraction", m.mean_fixed_fraction},
                  {"time_first_fix_s", r.time_first_fix},
                  {"mean_track_length_s", r.mean_track_length},
                  {"epochs", r.epochs},
                  {"skipped_epochs", r.skipped_epochs},
                  {"degraded", r.degraded}};
  json fixes = json::array();
  for (const auto& f : r.fixes) {
    fixes.push_back({{"time_s", f.time},
                     {"prns", f.prns},
                     {"indices", f.indices},
                     {"values", f.values},
                     {"truth", f.truth},
                     {"correct", f.correct},
                     {"success_prob", f.success_prob},
                     {"search", f.search}});
  }
  j["fixes"] = fixes;
  json events = json::array();
  for (const auto& e : r.events) {
    events.push_back({{"time_s", e.time}, {"kind", e.kind}, {"detail", e.detail}});
  }
  j["events"] = events;
  j["config"] = json::parse(r.config_json);
  os << j.dump(2) << '\n';
}

std::string summary_text(const RunReport& r) {
  const auto& m = r.metrics;
  std::ostringstream os;
  os << "seed " << r.seed << ": " << r.epochs << " epochs";
  if (r.skipped_epochs > 0) os << " (" << r.skipped_epochs << " skipped)";
  if (r.degraded) os << " DEGRADED";
  os << "\n  fix events " << m.fixes << ", wrong " << m.wrong_fixes << " (rate "
     << sig4(m.wrong_fix_rate) << ")";
  if (r.time_first_fix >= 0.0) os << ", first fix at " << sig4(r.time_first_fix / 60.0) << " min";
  os << "\n  rel. position RMS pre-fix " << sig4(m.pos_rms_pre) << " m, post-fix "
     << sig4(m.pos_rms_post) << " m (" << m.epochs_post << " epochs)"
     << "\n  rel. velocity RMS pre-fix " << sig4(m.vel_rms_pre) << " m/s, post-fix "
     << sig4(m.vel_rms_post) << " m/s"
     << "\n  mean fixed fraction " << sig4(m.mean_fixed_fraction) << ", mean track length "
     << sig4(r.mean_track_length / 60.0) << " min\n";
  return os.str();
}

}  // namespace cdgps::sim
