#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nhms/cli.hpp"

namespace fs = std::filesystem;
using nhms::cli::run_command;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result call(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_command(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Fresh scratch directory per test case.
fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("nhms_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& a : v) s += a + ' ';
  return s;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("presets lists every built-in scenario") {
  const auto r = call({"presets"});
  CHECK(r.code == 0);
  for (const auto& name : nhms::experiments::preset_names()) CHECK(r.out.find(name) != std::string::npos);
  CHECK(count_lines(r.out) == nhms::experiments::preset_names().size());
}

TEST_CASE("help and version exit cleanly") {
  auto r = call({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("sweep") != std::string::npos);
  r = call({"--version"});
  CHECK(r.code == 0);
  CHECK(r.out.find(nhms::kVersion) != std::string::npos);
  r = call({"run", "--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("--preset") != std::string::npos);
}

TEST_CASE("usage errors exit with 2 and print usage") {
  for (const std::vector<std::string>& args :
       {std::vector<std::string>{}, {"frobnicate"}, {"run"}, {"run", "--stride", "0", "--preset", "fig2a"},
        {"run", "--preset", "fig2a", "--config", "x.json"}, {"sweep", "--n-z", "1"}}) {
    INFO(join(args));
    const auto r = call(args);
    CHECK(r.code == 2);
    CHECK(r.err.find("error") != std::string::npos);
  }
}

TEST_CASE("unknown preset is a usage error") {
  const auto r = call({"run", "--preset", "fig99"});
  CHECK(r.code == 2);
  CHECK(r.err.find("fig99") != std::string::npos);
}

TEST_CASE("run --preset writes the output set and reruns byte-identically") {
  const auto dir = scratch("run");
  auto r = call({"run", "--preset", "fig2a", "--output", dir.string(), "--stride", "10"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("window 1") != std::string::npos);
  const auto run_dir = dir / "fig2a";
  for (const char* f : {"series.csv", "echoes.csv", "analytic.csv", "summary.json", "config.json"}) {
    INFO(f);
    CHECK(fs::is_regular_file(run_dir / f));
  }
  const auto series = slurp(run_dir / "series.csv");
  CHECK(count_lines(series) == 3002);  // comment, header, 30000 steps / 10
  const auto summary = nlohmann::json::parse(slurp(run_dir / "summary.json"));
  CHECK(summary["scenario"] == "fig2a");
  CHECK(summary["echoes"].size() == 2);
  CHECK(summary["config_hash"].get<std::string>().size() == 16);

  const auto first = slurp(run_dir / "series.csv") + slurp(run_dir / "summary.json") + slurp(run_dir / "echoes.csv");
  r = call({"run", "--preset", "fig2a", "--output", dir.string(), "--stride", "10"});
  REQUIRE(r.code == 0);
  CHECK(slurp(run_dir / "series.csv") + slurp(run_dir / "summary.json") + slurp(run_dir / "echoes.csv") == first);

  // the stored config reproduces the run
  const auto again = scratch("rerun");
  r = call({"run", "--config", (run_dir / "config.json").string(), "--output", again.string()});
  REQUIRE(r.code == 0);
  CHECK(slurp(again / "fig2a" / "series.csv") == series);
  CHECK(slurp(again / "fig2a" / "summary.json") == slurp(run_dir / "summary.json"));
}

TEST_CASE("--no-decay is reflected in the stored configuration") {
  const auto dir = scratch("nodecay");
  const auto r = call({"run", "--preset", "fig3-compress", "--no-decay", "--stride", "50", "--output", dir.string()});
  REQUIRE(r.code == 0);
  const auto cfg = nlohmann::json::parse(slurp(dir / "fig3-compress" / "config.json"));
  CHECK(cfg["solver"]["decay"] == false);
  CHECK(cfg["output"]["stride"] == 50);
}

TEST_CASE("the environment variable sets the default output directory") {
  const auto dir = scratch("env");
  ::setenv(nhms::cli::kOutputEnv, dir.string().c_str(), 1);
  const auto r = call({"run", "--preset", "fig2a-no-read", "--stride", "100"});
  ::unsetenv(nhms::cli::kOutputEnv);
  REQUIRE(r.code == 0);
  CHECK(fs::is_regular_file(dir / "fig2a-no-read" / "series.csv"));
  // a single window and no overlay without a read pulse
  CHECK_FALSE(fs::exists(dir / "fig2a-no-read" / "analytic.csv"));
  CHECK(nhms::cli::default_output_dir() == "nhms-out");
}

TEST_CASE("a config with problems exits 2 and names the field") {
  const auto dir = scratch("badcfg");
  const auto path = dir / "bad.json";
  std::ofstream(path) << R"({"scenario": "fig2a", "target": {"resonant_thickness": -1}})";
  const auto r = call({"run", "--config", path.string(), "--output", dir.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("target.resonant_thickness") != std::string::npos);

  std::ofstream(path) << "{ not json";
  CHECK(call({"run", "--config", path.string()}).code == 2);
  CHECK(call({"run", "--config", (dir / "missing.json").string()}).code == 2);
}

TEST_CASE("vector runs report the sigma fraction") {
  const auto dir = scratch("vector");
  const auto r = call({"run", "--config", NHMS_CONFIG_DIR "/axis-switch.json", "--output", dir.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("sigma fraction") != std::string::npos);
  const auto summary = nlohmann::json::parse(slurp(dir / "fig6" / "summary.json"));
  CHECK(summary["diagnostics"]["axis_switches"] == 1);
}

TEST_CASE("sweep writes a tidy efficiency table") {
  const auto dir = scratch("sweep");
  const auto r = call({"sweep", "--xi", "0,8,16", "--storage-times", "25:50:25", "--n-z", "40", "--dt", "0.02",
                       "--jobs", "2", "--output", dir.string()});
  REQUIRE(r.code == 0);
  const auto csv = slurp(dir / "sweep" / "efficiency_map.csv");
  CHECK(count_lines(csv) == 1 + 3 * 2);
  CHECK(csv.rfind("xi,storage_time_ns,efficiency\n", 0) == 0);
  CHECK(r.out.find("best xi") != std::string::npos);

  CHECK(call({"sweep", "--xi", "-4,8", "--output", dir.string()}).code == 2);
  CHECK(call({"sweep", "--xi", "8:4:1", "--output", dir.string()}).code == 2);
  CHECK(call({"sweep", "--storage-times", "0", "--output", dir.string()}).code == 2);
}

TEST_CASE("range parsing") {
  using nhms::cli::parse_range;
  CHECK(parse_range("2:10:2") == std::vector<double>{2, 4, 6, 8, 10});
  CHECK(parse_range("1,2.5") == std::vector<double>{1, 2.5});
  CHECK(parse_range("0.1:0.3:0.1").size() == 3);
  CHECK_THROWS_AS(parse_range("1:2"), nhms::InvalidArgument);
  CHECK_THROWS_AS(parse_range(","), nhms::InvalidArgument);
}

TEST_CASE("optimize writes its result") {
  const auto dir = scratch("optimize");
  auto r = call({"optimize", "--lower", "14", "--upper", "18", "--tolerance", "2", "--output", dir.string()});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "optimize" / "result.json"));
  CHECK(j["xi"].get<double>() >= 14.0);
  CHECK(j["xi"].get<double>() <= 18.0);
  CHECK(j["evaluations"].get<int>() >= 2);
  CHECK(j["decay"] == false);

  r = call({"optimize", "--lower", "30", "--upper", "10", "--output", dir.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("non-bracketing") != std::string::npos);
  CHECK(call({"optimize", "--upper", "150", "--output", dir.string()}).code == 2);
}

TEST_CASE("validate --quick passes") {
  const auto r = call({"validate", "--quick"});
  INFO(r.out);
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(count_lines(r.out) == 8);
}
