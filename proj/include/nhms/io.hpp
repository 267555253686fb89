#pragma once

// Output files. Numbers are formatted with a fixed printf pattern so repeated
// runs of the same configuration produce byte-identical files.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "nhms/config.hpp"
#include "nhms/error.hpp"
#include "nhms/experiments.hpp"
#include "nhms/version.hpp"

namespace nhms::io {

inline constexpr const char* kSeriesHeader =
    "t_ns,re_omega_x,im_omega_x,re_omega_y,im_omega_y,intensity,rhoS_exit,im_rhoP_exit";

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12e", v == 0.0 ? 0.0 : v);  // folds -0 into 0
  return buf;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

/// Time series at the exit face. Times in ns; field components and coherences as
/// stored by the solver (field in rad/ns). Scalar models leave the y columns zero.
inline void write_series_csv(const std::filesystem::path& path, const TimeSeries& ts,
                             bool coherences = true) {
  auto out = open_for_write(path);
  out << "# nhms series v" << kOutputFormatVersion << "; t in ns, omega in rad/ns\n";
  out << kSeriesHeader << '\n';
  std::string line;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const cd oy = ts.omega_y.empty() ? cd(0.0) : ts.omega_y[i];
    const bool have_rho = coherences && !ts.rho_s.empty();
    line = fmt(ts.t[i]);
    for (double v : {ts.omega_x[i].real(), ts.omega_x[i].imag(), oy.real(), oy.imag(), ts.intensity(i),
                     have_rho ? ts.rho_s[i].real() : 0.0, have_rho ? ts.rho_p[i].imag() : 0.0}) {
      line += ',';
      line += fmt(v);
    }
    out << line << '\n';
  }
}

inline void write_echoes_csv(const std::filesystem::path& path, const std::vector<EchoReport>& echoes) {
  auto out = open_for_write(path);
  out << "index,t_begin_ns,t_end_ns,peak_time_ns,re_peak_x,im_peak_x,re_peak_y,im_peak_y,peak_amplitude,"
         "sign,centroid_ns,fwhm_ns,energy,energy_x,energy_y,efficiency\n";
  for (const auto& e : echoes) {
    out << e.index;
    for (double v : {e.t_begin, e.t_end, e.peak_time, e.peak_x.real(), e.peak_x.imag(), e.peak_y.real(),
                     e.peak_y.imag(), e.peak_amplitude}) {
      out << ',' << fmt(v);
    }
    out << ',' << e.sign;
    for (double v : {e.centroid, e.fwhm, e.energy, e.energy_x, e.energy_y, e.efficiency}) out << ',' << fmt(v);
    out << '\n';
  }
}

inline void write_analytic_csv(const std::filesystem::path& path, const TimeSeries& ts,
                               const std::vector<cd>& overlay) {
  auto out = open_for_write(path);
  out << "t_ns,re_omega,im_omega\n";
  for (std::size_t i = 0; i < overlay.size(); ++i) {
    out << fmt(ts.t[i]) << ',' << fmt(overlay[i].real()) << ',' << fmt(overlay[i].imag()) << '\n';
  }
}

inline nlohmann::json echo_json(const EchoReport& e) {
  return {{"index", e.index},
          {"t_begin_ns", e.t_begin},
          {"t_end_ns", e.t_end},
          {"peak_time_ns", e.peak_time},
          {"peak_x", {e.peak_x.real(), e.peak_x.imag()}},
          {"peak_y", {e.peak_y.real(), e.peak_y.imag()}},
          {"peak_amplitude", e.peak_amplitude},
          {"sign", e.sign},
          {"centroid_ns", e.centroid},
          {"fwhm_ns", e.fwhm},
          {"energy", e.energy},
          {"energy_x", e.energy_x},
          {"energy_y", e.energy_y},
          {"sigma_fraction", e.sigma_fraction()},
          {"efficiency", e.efficiency}};
}

inline nlohmann::json summary_json(const experiments::ScenarioResult& r, const std::string& hash) {
  nlohmann::json j;
  j["format_version"] = kOutputFormatVersion;
  j["solver_version"] = kVersion;
  j["scenario"] = r.scenario.name;
  j["description"] = r.scenario.description;
  j["model"] = experiments::to_string(r.scenario.model);
  j["config_hash"] = hash;
  j["units"] = {{"time", "ns"}, {"rate", "rad/ns"}};
  j["resonant_thickness"] = r.scenario.target.resonant_thickness;
  j["decay"] = r.scenario.decay;
  j["samples"] = r.series.size();
  j["input_energy"] = r.input_energy();
  j["echoes"] = nlohmann::json::array();
  for (const auto& e : r.echoes) j["echoes"].push_back(echo_json(e));
  if (r.scenario.model == experiments::Model::vector) {
    j["diagnostics"] = {{"max_trace_deviation", r.diagnostics.max_trace_deviation},
                        {"max_hermiticity_deviation", r.diagnostics.max_hermiticity_deviation},
                        {"min_eigenvalue", r.diagnostics.min_eigenvalue},
                        {"axis_switches", r.diagnostics.axis_switches}};
  }
  return j;
}

struct WrittenFiles {
  std::filesystem::path directory;
  std::vector<std::filesystem::path> files;
};

/// Writes series.csv, echoes.csv, summary.json, config.json and, when a closed-form
/// overlay exists, analytic.csv into dir.
inline WrittenFiles write_run(const std::filesystem::path& dir, const experiments::ScenarioResult& r,
                              const config::RunConfig& cfg) {
  WrittenFiles w{dir, {}};
  const std::string hash = config::config_hash(cfg);
  write_series_csv(dir / "series.csv", r.series, cfg.write_coherences);
  w.files.push_back(dir / "series.csv");
  write_echoes_csv(dir / "echoes.csv", r.echoes);
  w.files.push_back(dir / "echoes.csv");
  if (!r.analytic.empty()) {
    write_analytic_csv(dir / "analytic.csv", r.series, r.analytic);
    w.files.push_back(dir / "analytic.csv");
  }
  {
    auto out = open_for_write(dir / "summary.json");
    out << summary_json(r, hash).dump(2) << '\n';
  }
  w.files.push_back(dir / "summary.json");
  {
    auto out = open_for_write(dir / "config.json");
    out << config::serialize(cfg);
  }
  w.files.push_back(dir / "config.json");
  return w;
}

inline void write_efficiency_map(const std::filesystem::path& path, const experiments::EfficiencyMap& m) {
  auto out = open_for_write(path);
  out << "xi,storage_time_ns,efficiency\n";
  for (std::size_t i = 0; i < m.xi.size(); ++i) {
    for (std::size_t j = 0; j < m.storage_times.size(); ++j) {
      out << fmt(m.xi[i]) << ',' << fmt(m.storage_times[j]) << ',' << fmt(m.at(i, j)) << '\n';
    }
  }
}

}  // namespace nhms::io
