#include "commands.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cdgps::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cdgps_test_" + name);
  fs::remove_all(p);
  return p;
}

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& text) {
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_CASE("dare table") {
  std::ostringstream out, err;
  CHECK(cmd_dare({}, out, err) == kOk);
  const std::string s = out.str();
  CHECK(s.find("lambda/4") != std::string::npos);
  CHECK(s.find("lambda/40") != std::string::npos);
  CHECK(s.find("reference") != std::string::npos);
}

TEST_CASE("dare rejects zero noise") {
  DareOptions o;
  o.r = {0.0};
  std::ostringstream out, err;
  CHECK(cmd_dare(o, out, err) == kValidation);
  CHECK(err.str().find("\"status\":\"error\"") != std::string::npos);
}

TEST_CASE("dare direct mode") {
  DareOptions o;
  o.d = {0.05, 0.05};
  o.n = 2;
  std::ostringstream out, err;
  CHECK(cmd_dare(o, out, err) == kOk);
  CHECK(out.str().find("direct success rate") != std::string::npos);
}

TEST_CASE("link budget table") {
  std::ostringstream out, err;
  CHECK(cmd_link_budget({}, out, err) == kOk);
  CHECK(out.str().find("C/N0") != std::string::npos);
  CHECK(out.str().find("within 0.2 dB") != std::string::npos);
}

TEST_CASE("run writes reports only on success") {
  const fs::path dir = scratch("run");
  const fs::path bad = write_file(dir / "cfg", "bad.json", R"({"kind": "leo", "nope": 1})");
  RunOptions o;
  o.config_path = bad.string();
  o.output_dir = (dir / "out").string();
  std::ostringstream out, err;
  CHECK(cmd_run(o, out, err) == kValidation);
  CHECK_FALSE(fs::exists(dir / "out"));

  const fs::path good = write_file(dir / "cfg", "good.json", R"({"kind": "leo"})");
  o.config_path = good.string();
  o.duration = 600.0;
  o.seed = 4;
  o.coupling = "none";
  CHECK(cmd_run(o, out, err) == kOk);
  CHECK(fs::exists(dir / "out" / "leo_iss_none_seed4.csv"));
  CHECK(fs::exists(dir / "out" / "leo_iss_none_seed4.json"));
  CHECK(fs::exists(dir / "out" / "leo_iss_none_seed4_config.json"));

  RunOptions missing;
  missing.config_path = (dir / "absent.json").string();
  missing.output_dir = (dir / "out2").string();
  CHECK(cmd_run(missing, out, err) != kOk);
  fs::remove_all(dir);
}

TEST_CASE("multipath map") {
  const fs::path dir = scratch("mp");
  MultipathMapOptions o;
  o.output_dir = dir.string();
  o.step_deg = 30.0;
  std::ostringstream out, err;
  CHECK(cmd_multipath_map(o, out, err) == kOk);
  CHECK(fs::exists(dir / "multipath_map.csv"));
  fs::remove_all(dir);
}
