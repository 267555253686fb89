#pragma once

// Turn-key scenarios: storage and retrieval, efficiency maps, temporal shaping,
// beam splitting, interference and polarization switching, plus a 1-D thickness
// optimizer. Times are absolute on the simulation grid; the first input and the
// write pulse are centered at kFirstPulseCenter.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <cmath>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "nhms/analytic.hpp"
#include "nhms/error.hpp"
#include "nhms/model.hpp"
#include "nhms/polarization.hpp"
#include "nhms/solver.hpp"

namespace nhms::experiments {

inline constexpr double kFirstPulseCenter = 15.0;
inline constexpr double kPulseFwhm = 9.0;
inline constexpr double kStorageTime = 75.0;
inline constexpr double kTrainSpacing = 50.0;

enum class Model { reduced, full, vector };

inline const char* to_string(Model m) {
  switch (m) {
    case Model::reduced: return "reduced";
    case Model::full: return "full";
    case Model::vector: return "vector";
  }
  return "reduced";
}

inline bool parse_model(const std::string& s, Model& out) {
  if (s == "reduced") out = Model::reduced;
  else if (s == "full") out = Model::full;
  else if (s == "vector") out = Model::vector;
  else return false;
  return true;
}

inline Grid scalar_grid(double t_end) { return Grid{200, 0.01, t_end}; }
inline Grid vector_grid(double t_end) { return Grid{100, 0.02, t_end}; }

struct Scenario {
  std::string name = "custom";
  std::string description;
  Model model = Model::reduced;
  IsotopeParams isotope = IsotopeParams::fe57();
  TargetParams target;
  PulseTrain train;
  std::vector<InputPulse> inputs;
  Grid grid;
  bool decay = true;
  double weak_field_ratio = kDefaultWeakFieldRatio;
  int output_stride = 1;

  SolverOptions solver_options() const {
    SolverOptions o;
    o.isotope = isotope;
    o.decay = decay;
    o.output_stride = output_stride;
    o.weak_field_ratio = weak_field_ratio;
    o.label = name;
    return o;
  }

  std::vector<FieldIssue> issues() const;

  void validate() const {
    auto list = issues();
    if (!list.empty()) throw ConfigError(std::move(list));
  }

  bool operator==(const Scenario&) const = default;
};

inline std::vector<FieldIssue> Scenario::issues() const {
  std::vector<FieldIssue> out;
  auto add = [&](std::string path, std::string msg) { out.push_back({std::move(path), std::move(msg)}); };
  if (!(isotope.lifetime > 0.0) || !std::isfinite(isotope.lifetime)) {
    add("isotope.lifetime_ns", "must be positive");
  }
  if (isotope.g_excited == isotope.g_ground) add("isotope.g_excited", "must differ from g_ground");
  if (!(target.resonant_thickness >= 0.0) || !std::isfinite(target.resonant_thickness)) {
    add("target.resonant_thickness", "must be >= 0");
  }
  if (!(target.length > 0.0) || !std::isfinite(target.length)) add("target.length", "must be positive");
  if (grid.n_z < 2) add("grid.n_z", "must be >= 2");
  if (!(grid.dt > 0.0) || !std::isfinite(grid.dt)) add("grid.dt", "must be positive");
  if (!(grid.t_end > 0.0) || !std::isfinite(grid.t_end)) add("grid.t_end", "must be positive");
  if (output_stride < 1) add("output.stride", "must be >= 1");
  if (!(weak_field_ratio >= 0.0)) add("solver.weak_field_ratio", "must be >= 0");

  bool axis_change = false;
  for (std::size_t i = 0; i < train.pulses.size(); ++i) {
    const auto& p = train.pulses[i];
    const std::string at = "pulses[" + std::to_string(i) + "]";
    if (!(p.envelope.fwhm > 0.0) || !std::isfinite(p.envelope.fwhm)) add(at + ".fwhm", "must be positive");
    if (!std::isfinite(p.area)) add(at + ".area", "must be finite");
    if (!(p.envelope.center >= 0.0 && p.envelope.center <= grid.t_end)) {
      add(at + ".center", "must lie within [0, t_end]");
    }
    if (std::abs(norm(p.axis) - 1.0) > 1e-9) add(at + ".axis", "must be a unit vector");
    if (std::abs(p.axis[2]) > 1e-12) add(at + ".axis", "must be perpendicular to the beam (z)");
    if (i > 0 && p.envelope.center < train.pulses[i - 1].envelope.center) {
      add(at + ".center", "pulses must be ordered by center");
    }
    if (i > 0 && p.axis != train.pulses[i - 1].axis) axis_change = true;
    if (p.envelope.fwhm > 0.0 && grid.dt > 0.0) {
      const double zeeman = model == Model::vector ? 1.73 : 1.0;
      if (grid.dt * std::abs(p.envelope.amplitude) * zeeman > 0.05 + 1e-12) {
        add("grid.dt", "does not resolve pulse " + std::to_string(i) + "; reduce dt");
      }
    }
  }
  if (grid.dt * isotope.decay_rate > 0.05) add("grid.dt", "does not resolve the decay rate");
  if (axis_change && model != Model::vector) add("model", "axis changes require the vector model");

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& in = inputs[i];
    const std::string at = "inputs[" + std::to_string(i) + "]";
    if (!(in.envelope.fwhm > 0.0) || !std::isfinite(in.envelope.fwhm)) add(at + ".fwhm", "must be positive");
    if (!std::isfinite(in.envelope.amplitude)) add(at + ".amplitude", "must be finite");
    if (weak_field_ratio > 0.0 && std::abs(in.envelope.amplitude) >
                                      weak_field_ratio * isotope.decay_rate * (1.0 + 1e-12)) {
      add(at + ".amplitude", "exceeds the weak-field bound");
    }
    if (!std::isfinite(in.phase)) add(at + ".phase", "must be finite");
    if (!(in.envelope.center >= 0.0 && in.envelope.center <= grid.t_end)) {
      add(at + ".center", "must lie within [0, t_end]");
    }
    if (in.polarization == Polarization::sigma && model != Model::vector) {
      add(at + ".polarization", "sigma inputs require the vector model");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scenario builders

inline double default_input_amplitude(const IsotopeParams& iso = IsotopeParams::fe57()) {
  return kDefaultWeakFieldRatio * iso.decay_rate;
}

inline InputPulse make_input(double center, double amplitude, double phase = 0.0,
                             Polarization pol = Polarization::pi, double fwhm = kPulseFwhm) {
  return InputPulse{{amplitude, center, fwhm}, phase, pol};
}

inline Scenario storage_retrieval_scenario(double xi, double storage_time = kStorageTime,
                                           double read_fwhm = kPulseFwhm, bool with_read = true,
                                           double t_end = 300.0) {
  Scenario s;
  s.name = "storage";
  s.target = TargetParams::make(xi, s.isotope.decay_rate);
  std::vector<MagneticPulse> p{MagneticPulse::from_area(kFirstPulseCenter, kPulseFwhm, kPi)};
  if (with_read) p.push_back(MagneticPulse::from_area(kFirstPulseCenter + storage_time, read_fwhm, kPi));
  s.train = PulseTrain(std::move(p));
  s.inputs = {make_input(kFirstPulseCenter, default_input_amplitude(s.isotope))};
  s.grid = scalar_grid(t_end);
  return s;
}

inline Scenario beam_splitter_scenario(double xi, int pulses = 4, double t_end = 500.0) {
  if (pulses < 1) throw InvalidArgument("need at least one pulse");
  Scenario s;
  s.name = "beam-splitter";
  s.target = TargetParams::make(xi, s.isotope.decay_rate);
  std::vector<MagneticPulse> p;
  for (int i = 0; i < pulses; ++i) {
    p.push_back(MagneticPulse::from_area(kFirstPulseCenter + kTrainSpacing * i, kPulseFwhm, kPi));
  }
  s.train = PulseTrain(std::move(p));
  s.inputs = {make_input(kFirstPulseCenter, default_input_amplitude(s.isotope))};
  s.grid = scalar_grid(t_end);
  return s;
}

/// Three pi pulses 50 ns apart; a second input with relative amplitude `ratio`
/// and phase `phase` arrives together with the second pulse.
inline Scenario interference_scenario(double xi, double phase, double ratio = 0.5, double t_end = 500.0) {
  Scenario s = beam_splitter_scenario(xi, 3, t_end);
  s.name = "interference";
  s.inputs.push_back(make_input(kFirstPulseCenter + kTrainSpacing, ratio * default_input_amplitude(s.isotope),
                                phase));
  return s;
}

inline Scenario polarization_scenario(double xi = 16.0, Vec3 write_axis = kAxisY, Vec3 read_axis = kAxisX,
                                      double storage_time = kStorageTime, double t_end = 200.0) {
  Scenario s;
  s.name = "polarization";
  s.model = Model::vector;
  s.target = TargetParams::make(xi, s.isotope.decay_rate);
  s.train = PulseTrain({MagneticPulse::from_area(kFirstPulseCenter, kPulseFwhm, kPi, write_axis),
                        MagneticPulse::from_area(kFirstPulseCenter + storage_time, kPulseFwhm, kPi, read_axis)});
  s.inputs = {make_input(kFirstPulseCenter, default_input_amplitude(s.isotope))};
  s.grid = vector_grid(t_end);
  return s;
}

namespace detail {

inline Scenario named(Scenario s, std::string name, std::string description) {
  s.name = std::move(name);
  s.description = std::move(description);
  return s;
}

}  // namespace detail

inline std::vector<std::string> preset_names() {
  return {"fig2a",           "fig2a-no-read",    "fig3-compress",     "fig3-stretch",
          "fig4-xi8",        "fig4-xi16",        "fig4-xi24",         "fig5-xi8-phase0",
          "fig5-xi8-phasepi", "fig5-xi24-phase0", "fig5-xi24-phasepi", "fig6"};
}

inline Scenario preset(const std::string& name) {
  using detail::named;
  if (name == "fig2a") {
    return named(storage_retrieval_scenario(16.0), name, "storage and retrieval, xi = 16, read 75 ns after write");
  }
  if (name == "fig2a-no-read") {
    return named(storage_retrieval_scenario(16.0, kStorageTime, kPulseFwhm, false), name,
                 "write pulse only; the coherence is never read out");
  }
  if (name == "fig3-compress") {
    return named(storage_retrieval_scenario(16.0, kStorageTime, 4.5), name, "read pulse FWHM 4.5 ns");
  }
  if (name == "fig3-stretch") {
    return named(storage_retrieval_scenario(16.0, kStorageTime, 18.0), name, "read pulse FWHM 18 ns");
  }
  for (int xi : {8, 16, 24}) {
    if (name == "fig4-xi" + std::to_string(xi)) {
      return named(beam_splitter_scenario(xi), name, "four pi pulses 50 ns apart, xi = " + std::to_string(xi));
    }
    for (const char* ph : {"0", "pi"}) {
      if (name == "fig5-xi" + std::to_string(xi) + "-phase" + ph) {
        const double phase = std::string(ph) == "pi" ? kPi : 0.0;
        return named(interference_scenario(xi, phase), name,
                     "three pi pulses; half-amplitude second input with the second pulse, phase " +
                         std::string(ph));
      }
    }
  }
  if (name == "fig6") {
    return named(polarization_scenario(), name, "write axis y, read axis x, pi-polarized input");
  }
  throw InvalidArgument("unknown preset '" + name + "'");
}

inline bool has_preset(const std::string& name) {
  const auto n = preset_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

// ---------------------------------------------------------------------------
// Running

struct ScenarioResult {
  Scenario scenario;
  TimeSeries series;
  std::vector<EchoReport> echoes;
  std::vector<cd> analytic;  // closed-form overlay on series.t, when available
  polarization::VectorDiagnostics diagnostics;
  double seconds = 0.0;

  double input_energy() const { return series.input_energy(); }
};

inline TimeSeries simulate(const Scenario& s, polarization::VectorDiagnostics* diag = nullptr) {
  s.validate();
  const auto opts = s.solver_options();
  switch (s.model) {
    case Model::reduced: return run_reduced(s.train, s.inputs, s.target, s.grid, opts);
    case Model::full: return run_full(s.train, s.inputs, s.target, s.grid, opts);
    case Model::vector: return polarization::run_vector(s.train, s.inputs, s.target, s.grid, opts, diag);
  }
  return {};
}

/// Closed-form overlay for a write/read pair: first-pass fields before the midpoint,
/// first echo after it.
inline std::vector<cd> analytic_overlay(const Scenario& s, const TimeSeries& ts) {
  if (s.train.pulses.size() != 2 || s.inputs.size() != 1 || s.model == Model::vector) return {};
  const auto& w = s.train.pulses[0].envelope;
  const auto& r = s.train.pulses[1].envelope;
  const double mid = 0.5 * (w.center + r.center);
  const auto echo = analytic::first_echo(s.target.resonant_thickness, w, r, s.inputs[0], s.isotope, s.decay);
  std::vector<cd> out(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double t = ts.t[i];
    out[i] = t < mid ? analytic::first_pass(s.target.resonant_thickness, w, s.inputs[0], s.isotope, t, s.decay).omega
                     : echo(t);
  }
  return out;
}

inline ScenarioResult run_scenario(const Scenario& s) {
  const auto start = std::chrono::steady_clock::now();
  ScenarioResult r;
  r.scenario = s;
  r.series = simulate(s, &r.diagnostics);
  r.echoes = echo_segments(r.series, s.train);
  r.analytic = analytic_overlay(s, r.series);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

/// Runs f(i) for i in [0, count) on up to `jobs` threads; results keep index order.
template <class T>
std::vector<T> parallel_map(std::size_t count, unsigned jobs, const std::function<T(std::size_t)>& f) {
  std::vector<T> out(count);
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(count, 1)));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = f(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count && !failed; i = next++) {
        try {
          out[i] = f(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
  return out;
}

// ---------------------------------------------------------------------------
// Named scenario runners

inline ScenarioResult scenario_storage_retrieval(bool decay = true) {
  Scenario s = preset("fig2a");
  s.decay = decay;
  return run_scenario(s);
}

struct ShapingResult {
  ScenarioResult compressed;
  ScenarioResult stretched;
};

inline ShapingResult scenario_temporal_shaping() {
  return {run_scenario(preset("fig3-compress")), run_scenario(preset("fig3-stretch"))};
}

inline ScenarioResult scenario_beam_splitter(double xi) {
  Scenario s = beam_splitter_scenario(xi);
  s.name = "fig4-xi" + std::to_string(static_cast<int>(std::lround(xi)));
  return run_scenario(s);
}

inline ScenarioResult scenario_interference(double phase, double xi, double ratio = 0.5) {
  return run_scenario(interference_scenario(xi, phase, ratio));
}

inline ScenarioResult scenario_polarization() { return run_scenario(preset("fig6")); }

struct MapOptions {
  bool decay = true;
  int n_z = 200;
  double dt = 0.01;
  double tail = 50.0;  // simulated time after the read center
  unsigned jobs = 0;   // 0 = hardware concurrency
};

/// First-echo efficiency for a write/read pair separated by storage_time. Only the
/// radiated field counts, so at short storage times the tail of the transmitted
/// input does not leak into the echo window.
inline double first_echo_efficiency(double xi, double storage_time, const MapOptions& o = {}) {
  if (!(storage_time > 0.0)) throw InvalidArgument("storage time must be positive");
  Scenario s = storage_retrieval_scenario(xi, storage_time, kPulseFwhm, true,
                                          kFirstPulseCenter + storage_time + o.tail);
  s.grid.n_z = o.n_z;
  s.grid.dt = o.dt;
  s.decay = o.decay;
  const TimeSeries ts = simulate(s);
  const auto b = window_boundaries(ts, s.train);
  return analytic::echo_efficiency(scattered_energy(ts, b[1], b[2]), ts.input_energy());
}

struct EfficiencyMap {
  std::vector<double> xi;
  std::vector<double> storage_times;
  std::vector<double> eta;  // row-major, xi index outer

  double at(std::size_t i, std::size_t j) const { return eta.at(i * storage_times.size() + j); }

  /// Index of the largest efficiency in column j.
  std::size_t argmax_xi(std::size_t j) const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < xi.size(); ++i) {
      if (at(i, j) > at(best, j)) best = i;
    }
    return best;
  }
};

inline EfficiencyMap scenario_efficiency_map(const std::vector<double>& xi,
                                             const std::vector<double>& storage_times,
                                             const MapOptions& o = {}) {
  EfficiencyMap m{xi, storage_times, {}};
  const std::size_t nt = storage_times.size();
  m.eta = parallel_map<double>(xi.size() * nt, o.jobs, [&](std::size_t k) {
    return first_echo_efficiency(xi[k / nt], storage_times[k % nt], o);
  });
  return m;
}

struct OptimizeOptions {
  double storage_time = 25.0;
  /// Damping off makes the objective independent of the storage time.
  bool decay = false;
  double tolerance = 0.1;
  int n_z = 200;
  double dt = 0.01;
};

struct OptimizeResult {
  double xi = 0.0;
  double eta = 0.0;
  int evaluations = 0;
};

/// Golden-section search for the thickness maximizing an objective on [lo, hi].
inline OptimizeResult golden_section_max(double lo, double hi, double tolerance,
                                         const std::function<double(double)>& f) {
  if (!(lo <= hi)) throw InvalidArgument("non-bracketing bounds: lower exceeds upper");
  if (!(tolerance > 0.0)) throw InvalidArgument("tolerance must be positive");
  OptimizeResult r;
  auto eval = [&](double x) {
    ++r.evaluations;
    return f(x);
  };
  if (hi - lo <= tolerance) {
    r.xi = 0.5 * (lo + hi);
    r.eta = eval(r.xi);
    return r;
  }
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = eval(c), fd = eval(d);
  while (b - a > tolerance) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = eval(d);
    }
  }
  if (fc >= fd) {
    r.xi = c;
    r.eta = fc;
  } else {
    r.xi = d;
    r.eta = fd;
  }
  return r;
}

inline OptimizeResult optimize_thickness(double lo, double hi, const OptimizeOptions& o = {}) {
  if (!(lo >= 0.0 && hi <= 100.0)) throw InvalidArgument("bounds must lie within [0, 100]");
  MapOptions m;
  m.decay = o.decay;
  m.n_z = o.n_z;
  m.dt = o.dt;
  return golden_section_max(lo, hi, o.tolerance,
                            [&](double xi) { return first_echo_efficiency(xi, o.storage_time, m); });
}

// ---------------------------------------------------------------------------
// Normalization of the general n-th echo series

struct NthEchoCalibration {
  int n = 4;
  std::vector<double> xi;
  std::vector<double> absorption;
  std::vector<double> ratio;  // simulated echo amplitude / raw series value
  double extrapolated = 0.0;  // thin-sample limit of the ratio
  double factor = 0.0;        // extrapolated value snapped to {1/2, 1}
  double check_xi = 0.0;
  double check_absorption = 0.0;
  double check_ratio = 0.0;  // ratio at the moderate thickness check_xi
};

/// Least-squares amplitude of the simulated (n-1)-th echo against the predicted
/// shape Sin[phase] * decay, divided by the raw series prefactor.
inline double nth_echo_ratio(int n, double xi, int n_z = 200, double dt = 0.01) {
  Scenario s = beam_splitter_scenario(xi, n, kFirstPulseCenter + kTrainSpacing * (n - 1) + 50.0);
  s.grid.n_z = n_z;
  s.grid.dt = dt;
  const TimeSeries ts = simulate(s);
  const auto b = window_boundaries(ts, s.train);
  const auto& read = s.train.pulses.back().envelope;
  const double gamma = s.isotope.decay_rate;
  const double omega0 = s.inputs[0].envelope.amplitude;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts.t[i] < b[n - 1]) continue;
    const double shape = std::sin(read.phase(ts.t[i])) * std::exp(-0.5 * gamma * (ts.t[i] - kFirstPulseCenter));
    num += ts.omega_x[i].real() * shape;
    den += shape * shape;
  }
  const double raw = analytic::nth_echo_raw(n, analytic::absorption(xi, read.amplitude, gamma));
  return num / den / (omega0 * raw);
}

inline NthEchoCalibration calibrate_nth_echo(int n = 4, double thin_xi = 1.0, double check_xi = 8.0,
                                             int n_z = 200, double dt = 0.01) {
  if (n < 2) throw InvalidArgument("calibration needs n >= 2");
  NthEchoCalibration c;
  c.n = n;
  const double d0 = amplitude_for_area(kPulseFwhm, kPi);
  const double gamma = IsotopeParams::fe57().decay_rate;
  c.xi = {thin_xi, 2.0 * thin_xi};
  for (double x : c.xi) {
    c.absorption.push_back(analytic::absorption(x, d0, gamma));
    c.ratio.push_back(nth_echo_ratio(n, x, n_z, dt));
  }
  // first-order Richardson step towards zero thickness
  c.extrapolated = 2.0 * c.ratio[0] - c.ratio[1];
  c.factor = std::abs(c.extrapolated - 0.5) < std::abs(c.extrapolated - 1.0) ? 0.5 : 1.0;
  c.check_xi = check_xi;
  c.check_absorption = analytic::absorption(check_xi, d0, gamma);
  c.check_ratio = nth_echo_ratio(n, check_xi, n_z, dt);
  return c;
}

}  // namespace nhms::experiments
