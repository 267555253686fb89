#pragma once

// JSON run configuration. A file names a preset scenario and may override any
// part of it; unknown keys are rejected and every problem is reported with the
// dotted path of the offending field.
//
//   {
//     "schema": 1,
//     "scenario": "fig2a",
//     "model": "reduced",
//     "isotope": {"lifetime_ns": 141, "g_ground": 0.18088, "g_excited": -0.10327},
//     "target": {"resonant_thickness": 16, "length": 1},
//     "grid": {"n_z": 200, "dt": 0.01, "t_end": 300},
//     "pulses": [{"center": 15, "fwhm": 9, "area": 3.14159, "axis": [0, 1, 0]}],
//     "inputs": [{"center": 15, "fwhm": 9, "amplitude": 7.09e-6, "phase": 0, "polarization": "pi"}],
//     "solver": {"decay": true, "weak_field_ratio": 0.001},
//     "output": {"directory": "out", "stride": 10, "coherences": true}
//   }

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nhms/error.hpp"
#include "nhms/experiments.hpp"

namespace nhms::config {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

struct RunConfig {
  int schema = kSchemaVersion;
  experiments::Scenario scenario;
  std::string output_directory;  // empty = use the CLI default
  bool write_coherences = true;

  bool operator==(const RunConfig&) const = default;
};

namespace detail {

class Reader {
 public:
  std::vector<FieldIssue> issues;

  void fail(const std::string& path, const std::string& msg) { issues.push_back({path, msg}); }

  bool object(const json& j, const std::string& path, const std::set<std::string>& allowed) {
    if (!j.is_object()) {
      fail(path, "expected an object");
      return false;
    }
    for (const auto& [key, value] : j.items()) {
      if (!allowed.count(key)) fail(join(path, key), "unknown key");
    }
    return true;
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  bool number(const json& j, const std::string& key, const std::string& path, double& out) {
    if (!j.contains(key)) return false;
    const auto& v = j.at(key);
    if (!v.is_number()) {
      fail(join(path, key), "expected a number");
      return false;
    }
    out = v.get<double>();
    return true;
  }

  bool integer(const json& j, const std::string& key, const std::string& path, int& out) {
    if (!j.contains(key)) return false;
    const auto& v = j.at(key);
    if (!v.is_number_integer()) {
      fail(join(path, key), "expected an integer");
      return false;
    }
    out = v.get<int>();
    return true;
  }

  bool boolean(const json& j, const std::string& key, const std::string& path, bool& out) {
    if (!j.contains(key)) return false;
    const auto& v = j.at(key);
    if (!v.is_boolean()) {
      fail(join(path, key), "expected true or false");
      return false;
    }
    out = v.get<bool>();
    return true;
  }

  bool string(const json& j, const std::string& key, const std::string& path, std::string& out) {
    if (!j.contains(key)) return false;
    const auto& v = j.at(key);
    if (!v.is_string()) {
      fail(join(path, key), "expected a string");
      return false;
    }
    out = v.get<std::string>();
    return true;
  }

  bool vec3(const json& j, const std::string& key, const std::string& path, Vec3& out) {
    if (!j.contains(key)) return false;
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() || !v[2].is_number()) {
      fail(join(path, key), "expected an array of three numbers");
      return false;
    }
    out = {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
    return true;
  }
};

}  // namespace detail

/// Builds a validated configuration from an already-parsed JSON document.
inline RunConfig from_json(const json& root) {
  detail::Reader r;
  RunConfig cfg;
  if (!r.object(root, "", {"schema", "scenario", "description", "model", "isotope", "target", "grid",
                           "pulses", "inputs", "solver", "output"})) {
    throw ConfigError(r.issues);
  }
  if (r.integer(root, "schema", "", cfg.schema) && cfg.schema != kSchemaVersion) {
    r.fail("schema", "unsupported schema version " + std::to_string(cfg.schema));
  }

  std::string name = "custom";
  r.string(root, "scenario", "", name);
  experiments::Scenario& s = cfg.scenario;
  if (name != "custom") {
    if (experiments::has_preset(name)) {
      s = experiments::preset(name);
    } else {
      r.fail("scenario", "unknown preset '" + name + "'");
    }
  } else {
    s.grid = experiments::scalar_grid(300.0);
  }
  r.string(root, "description", "", s.description);

  std::string model;
  if (r.string(root, "model", "", model) && !experiments::parse_model(model, s.model)) {
    r.fail("model", "expected reduced, full or vector");
  }

  if (root.contains("isotope")) {
    const auto& j = root.at("isotope");
    if (r.object(j, "isotope", {"lifetime_ns", "g_ground", "g_excited"})) {
      double lifetime = s.isotope.lifetime, gg = s.isotope.g_ground, ge = s.isotope.g_excited;
      r.number(j, "lifetime_ns", "isotope", lifetime);
      r.number(j, "g_ground", "isotope", gg);
      r.number(j, "g_excited", "isotope", ge);
      s.isotope = IsotopeParams::with_lifetime(lifetime, gg, ge);
    }
  }

  double xi = s.target.resonant_thickness;
  double length = s.target.length;
  if (root.contains("target")) {
    const auto& j = root.at("target");
    if (r.object(j, "target", {"resonant_thickness", "length"})) {
      r.number(j, "resonant_thickness", "target", xi);
      r.number(j, "length", "target", length);
    }
  }
  // beta depends on the (possibly overridden) decay rate, so rebuild it here.
  s.target.resonant_thickness = xi;
  s.target.length = length;
  s.target.beta_length = 4.0 * s.isotope.decay_rate * xi;

  if (root.contains("grid")) {
    const auto& j = root.at("grid");
    if (r.object(j, "grid", {"n_z", "dt", "t_end"})) {
      r.integer(j, "n_z", "grid", s.grid.n_z);
      r.number(j, "dt", "grid", s.grid.dt);
      r.number(j, "t_end", "grid", s.grid.t_end);
    }
  }

  if (root.contains("pulses")) {
    const auto& arr = root.at("pulses");
    if (!arr.is_array()) {
      r.fail("pulses", "expected an array");
    } else {
      std::vector<MagneticPulse> pulses;
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string at = "pulses[" + std::to_string(i) + "]";
        const auto& j = arr[i];
        if (!r.object(j, at, {"center", "fwhm", "area", "axis"})) continue;
        double center = 0.0, fwhm = experiments::kPulseFwhm, area = kPi;
        Vec3 axis = kAxisY;
        if (!j.contains("center")) r.fail(at + ".center", "required");
        r.number(j, "center", at, center);
        r.number(j, "fwhm", at, fwhm);
        r.number(j, "area", at, area);
        r.vec3(j, "axis", at, axis);
        if (!(fwhm > 0.0)) {
          r.fail(at + ".fwhm", "must be positive");
          continue;
        }
        if (!(norm(axis) > 0.0)) {
          r.fail(at + ".axis", "must be non-zero");
          continue;
        }
        pulses.push_back(MagneticPulse::from_area(center, fwhm, area, axis));
      }
      // keep file order so ordering mistakes are reported, not silently fixed
      s.train.pulses = std::move(pulses);
    }
  }

  if (root.contains("inputs")) {
    const auto& arr = root.at("inputs");
    if (!arr.is_array()) {
      r.fail("inputs", "expected an array");
    } else {
      std::vector<InputPulse> inputs;
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string at = "inputs[" + std::to_string(i) + "]";
        const auto& j = arr[i];
        if (!r.object(j, at, {"center", "fwhm", "amplitude", "phase", "polarization"})) continue;
        InputPulse in = experiments::make_input(0.0, experiments::default_input_amplitude(s.isotope));
        if (!j.contains("center")) r.fail(at + ".center", "required");
        r.number(j, "center", at, in.envelope.center);
        r.number(j, "fwhm", at, in.envelope.fwhm);
        r.number(j, "amplitude", at, in.envelope.amplitude);
        r.number(j, "phase", at, in.phase);
        std::string pol;
        if (r.string(j, "polarization", at, pol)) {
          if (pol == "pi") in.polarization = Polarization::pi;
          else if (pol == "sigma") in.polarization = Polarization::sigma;
          else r.fail(at + ".polarization", "expected pi or sigma");
        }
        inputs.push_back(in);
      }
      s.inputs = std::move(inputs);
    }
  }

  if (root.contains("solver")) {
    const auto& j = root.at("solver");
    if (r.object(j, "solver", {"decay", "weak_field_ratio"})) {
      r.boolean(j, "decay", "solver", s.decay);
      r.number(j, "weak_field_ratio", "solver", s.weak_field_ratio);
    }
  }

  if (root.contains("output")) {
    const auto& j = root.at("output");
    if (r.object(j, "output", {"directory", "stride", "coherences"})) {
      r.string(j, "directory", "output", cfg.output_directory);
      r.integer(j, "stride", "output", s.output_stride);
      r.boolean(j, "coherences", "output", cfg.write_coherences);
    }
  }

  auto issues = std::move(r.issues);
  if (issues.empty()) {
    for (auto& issue : s.issues()) issues.push_back(std::move(issue));
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return cfg;
}

inline RunConfig parse_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({{"", std::string("malformed JSON: ") + e.what()}});
  }
  return from_json(root);
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({{"", "cannot read '" + path + "'"}});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str());
}

/// Fully explicit document; parsing it yields an equal configuration.
inline json to_json(const RunConfig& cfg) {
  const auto& s = cfg.scenario;
  json j;
  j["schema"] = cfg.schema;
  j["scenario"] = s.name;
  j["description"] = s.description;
  j["model"] = experiments::to_string(s.model);
  j["isotope"] = {{"lifetime_ns", s.isotope.lifetime},
                  {"g_ground", s.isotope.g_ground},
                  {"g_excited", s.isotope.g_excited}};
  j["target"] = {{"resonant_thickness", s.target.resonant_thickness}, {"length", s.target.length}};
  j["grid"] = {{"n_z", s.grid.n_z}, {"dt", s.grid.dt}, {"t_end", s.grid.t_end}};
  j["pulses"] = json::array();
  for (const auto& p : s.train.pulses) {
    j["pulses"].push_back({{"center", p.envelope.center},
                           {"fwhm", p.envelope.fwhm},
                           {"area", p.area},
                           {"axis", {p.axis[0], p.axis[1], p.axis[2]}}});
  }
  j["inputs"] = json::array();
  for (const auto& in : s.inputs) {
    j["inputs"].push_back({{"center", in.envelope.center},
                           {"fwhm", in.envelope.fwhm},
                           {"amplitude", in.envelope.amplitude},
                           {"phase", in.phase},
                           {"polarization", to_string(in.polarization)}});
  }
  j["solver"] = {{"decay", s.decay}, {"weak_field_ratio", s.weak_field_ratio}};
  j["output"] = {{"directory", cfg.output_directory},
                 {"stride", s.output_stride},
                 {"coherences", cfg.write_coherences}};
  return j;
}

inline std::string serialize(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

/// 64-bit FNV-1a over the canonical document, excluding the output directory.
inline std::string config_hash(const RunConfig& cfg) {
  json j = to_json(cfg);
  j["output"].erase("directory");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace nhms::config
