#pragma once

// Slab-grid integrators for the field/nuclei system with the retardation term
// dropped. Coherences advance with classical RK4; at every stage the field is
// rebuilt from the incident envelope by a cumulative trapezoid in z.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "nhms/error.hpp"
#include "nhms/model.hpp"

namespace nhms {

inline constexpr double kCouplingC = 0.81649658092772603;  // sqrt(2/3)

struct SolverOptions {
  IsotopeParams isotope = IsotopeParams::fe57();
  /// When false the Gamma damping of the coherences (and population feeding in the
  /// full model) is switched off while beta keeps its Gamma-dependent value.
  bool decay = true;
  bool record_coherences = true;
  int output_stride = 1;
  double weak_field_ratio = kDefaultWeakFieldRatio;
  double instability_factor = 10.0;
  std::string label;

  double damping() const { return decay ? 0.5 * isotope.decay_rate : 0.0; }
};

struct TimeSeries {
  std::string label;
  std::string model;
  double dt_out = 0.0;
  std::vector<double> t;
  std::vector<cd> omega_x;  // Omega(L, t), pi component
  std::vector<cd> omega_y;  // sigma component; empty for scalar models
  std::vector<cd> input_x;  // Omega(0, t)
  std::vector<cd> input_y;
  std::vector<cd> rho_s;    // exit-face spin coherence (scalar models)
  std::vector<cd> rho_p;    // exit-face polarization coherence (scalar models)
  Grid grid;
  TargetParams target;
  PulseTrain train;

  std::size_t size() const { return t.size(); }
  bool vector_valued() const { return !omega_y.empty(); }

  double intensity(std::size_t i) const {
    double v = std::norm(omega_x[i]);
    if (!omega_y.empty()) v += std::norm(omega_y[i]);
    return v;
  }

  double input_intensity(std::size_t i) const {
    double v = std::norm(input_x[i]);
    if (!input_y.empty()) v += std::norm(input_y[i]);
    return v;
  }

  double input_energy() const {
    double e = 0.0;
    for (std::size_t i = 0; i < size(); ++i) e += input_intensity(i);
    return e * dt_out;
  }

  double output_energy() const {
    double e = 0.0;
    for (std::size_t i = 0; i < size(); ++i) e += intensity(i);
    return e * dt_out;
  }
};

/// Snapshot handed to observers of the reduced model; index 0 is the entrance face.
struct ReducedField {
  double dz = 0.0;
  std::vector<cd> rho_s;
  std::vector<cd> rho_p;
  std::vector<cd> omega;
};

struct FullField {
  double dz = 0.0;
  std::vector<double> r11, r22, r33, r44;
  std::vector<cd> r32, r41;
  std::vector<cd> omega;

  double max_trace_deviation() const {
    double m = 0.0;
    for (std::size_t j = 0; j < r11.size(); ++j) {
      m = std::max(m, std::abs(r11[j] + r22[j] + r33[j] + r44[j] - 1.0));
    }
    return m;
  }
};

using ReducedObserver = std::function<void(double, const ReducedField&)>;
using FullObserver = std::function<void(double, const FullField&)>;

namespace detail {

inline cd times_i(cd z) { return {-z.imag(), z.real()}; }

inline void check_inputs(const PulseTrain& train, const std::vector<InputPulse>& inputs,
                         const TargetParams& target, const Grid& grid, const SolverOptions& opts,
                         double rate_scale = 1.0) {
  opts.isotope.validate();
  train.validate();
  target.validate(opts.isotope.decay_rate);
  grid.validate(std::max(rate_scale * train.max_amplitude(), opts.isotope.decay_rate));
  if (opts.output_stride < 1) throw InvalidArgument("output stride must be >= 1");
  if (!(opts.instability_factor > 0.0)) throw InvalidArgument("instability factor must be positive");
  for (const auto& in : inputs) {
    if (opts.weak_field_ratio > 0.0) {
      in.check_weak_field(opts.isotope.decay_rate, opts.weak_field_ratio);
    } else {
      in.envelope.validate();
    }
  }
}

inline void require_scalar_geometry(const PulseTrain& train, const std::vector<InputPulse>& inputs) {
  if (!train.uniform_axis()) {
    throw InvalidArgument("scalar models need a fixed quantization axis; use the vector model");
  }
  for (const auto& in : inputs) {
    if (in.polarization != Polarization::pi) {
      throw InvalidArgument("scalar models accept only pi-polarized inputs");
    }
  }
}

inline cd incident(const std::vector<InputPulse>& inputs, double t, Polarization pol) {
  cd v = 0.0;
  for (const auto& in : inputs) {
    if (in.polarization == pol) v += in(t);
  }
  return v;
}

/// Ceiling on any coherence magnitude; exceeding it signals a numerical blow-up.
inline double coherence_bound(const PulseTrain& train, const std::vector<InputPulse>& inputs,
                              double coupling, double factor) {
  double omega_sum = 0.0;
  double omega_area = 0.0;
  for (const auto& in : inputs) {
    omega_sum += std::abs(in.envelope.amplitude);
    omega_area += std::abs(in.envelope.integral());
  }
  double d0 = std::numeric_limits<double>::infinity();
  for (const auto& p : train.pulses) {
    if (p.envelope.amplitude != 0.0) d0 = std::min(d0, std::abs(p.envelope.amplitude));
  }
  double b = 0.5 * coupling * omega_area;
  if (std::isfinite(d0)) b = std::max(b, coupling * omega_sum / (2.0 * d0));
  return factor * b;
}

inline void check_stability(double t, double max_abs, double bound, double decay_rate) {
  const double limit = bound * std::exp(0.5 * decay_rate * t);
  if (!std::isfinite(max_abs) || max_abs > limit) {
    throw InstabilityError("coherence magnitude " + std::to_string(max_abs) + " exceeds bound " +
                           std::to_string(limit) + " at t = " + std::to_string(t) +
                           " ns; reduce dt");
  }
}

inline long sample_count(long steps, int stride) { return (steps + stride - 1) / stride; }

inline TimeSeries make_series(const PulseTrain& train, const TargetParams& target, const Grid& grid,
                              const SolverOptions& opts, const char* model, long steps,
                              bool vector_valued) {
  TimeSeries ts;
  ts.label = opts.label;
  ts.model = model;
  ts.dt_out = grid.dt * opts.output_stride;
  ts.grid = grid;
  ts.target = target;
  ts.train = train;
  const auto n = static_cast<std::size_t>(sample_count(steps, opts.output_stride));
  ts.t.reserve(n);
  ts.omega_x.reserve(n);
  ts.input_x.reserve(n);
  if (vector_valued) {
    ts.omega_y.reserve(n);
    ts.input_y.reserve(n);
  }
  if (opts.record_coherences && !vector_valued) {
    ts.rho_s.reserve(n);
    ts.rho_p.reserve(n);
  }
  return ts;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Reduced model: rho_S, rho_P and a scalar field.

inline TimeSeries run_reduced(const PulseTrain& train, const std::vector<InputPulse>& inputs,
                              const TargetParams& target, const Grid& grid,
                              const SolverOptions& opts = {}, const ReducedObserver& observer = {}) {
  detail::check_inputs(train, inputs, target, grid, opts);
  detail::require_scalar_geometry(train, inputs);

  const std::size_t n = static_cast<std::size_t>(grid.n_z) + 1;
  const double dz = grid.dz(target.length);
  const double kappa = target.beta() / kCouplingC;
  const double half_c = 0.5 * kCouplingC;
  const double g = opts.damping();
  const double dt = grid.dt;
  const long steps = grid.steps();
  const double bound = detail::coherence_bound(train, inputs, kCouplingC, opts.instability_factor);

  ReducedField f;
  f.dz = dz;
  f.rho_s.assign(n, 0.0);
  f.rho_p.assign(n, 0.0);
  f.omega.assign(n, 0.0);
  auto& S = f.rho_s;
  auto& P = f.rho_p;

  std::vector<cd> St(n), Pt(n), dS(n), dP(n), accS(n), accP(n), omega_tmp(n);

  // Field from P at time t, then the coherence derivatives.
  auto deriv = [&](double t, const std::vector<cd>& s, const std::vector<cd>& p, std::vector<cd>& ds,
                   std::vector<cd>& dp, std::vector<cd>& om) {
    const double delta = train.splitting(t);
    const cd om0 = detail::incident(inputs, t, Polarization::pi);
    cd cum = 0.0;
    om[0] = om0;
    for (std::size_t j = 0;; ++j) {
      const cd idp = detail::times_i(delta * p[j]);
      const cd ids = detail::times_i(delta * s[j]);
      ds[j] = -g * s[j] - idp;
      dp[j] = -g * p[j] - ids + detail::times_i(half_c * om[j]);
      if (j + 1 == n) break;
      cum += (0.5 * dz) * (p[j] + p[j + 1]);
      om[j + 1] = om0 + detail::times_i(kappa * cum);
    }
  };

  TimeSeries ts = detail::make_series(train, target, grid, opts, "reduced", steps, false);

  for (long k = 0; k < steps; ++k) {
    const double t = k * dt;
    deriv(t, S, P, dS, dP, f.omega);
    if (k % opts.output_stride == 0) {
      ts.t.push_back(t);
      ts.omega_x.push_back(f.omega[n - 1]);
      ts.input_x.push_back(f.omega[0]);
      if (opts.record_coherences) {
        ts.rho_s.push_back(S[n - 1]);
        ts.rho_p.push_back(P[n - 1]);
      }
      double m = 0.0;
      for (std::size_t j = 0; j < n; ++j) m = std::max({m, std::abs(S[j]), std::abs(P[j])});
      detail::check_stability(t, m, bound, opts.isotope.decay_rate);
      if (observer) observer(t, f);
    }
    const double h2 = 0.5 * dt;
    for (std::size_t j = 0; j < n; ++j) {
      accS[j] = dS[j];
      accP[j] = dP[j];
      St[j] = S[j] + h2 * dS[j];
      Pt[j] = P[j] + h2 * dP[j];
    }
    deriv(t + h2, St, Pt, dS, dP, omega_tmp);
    for (std::size_t j = 0; j < n; ++j) {
      accS[j] += 2.0 * dS[j];
      accP[j] += 2.0 * dP[j];
      St[j] = S[j] + h2 * dS[j];
      Pt[j] = P[j] + h2 * dP[j];
    }
    deriv(t + h2, St, Pt, dS, dP, omega_tmp);
    for (std::size_t j = 0; j < n; ++j) {
      accS[j] += 2.0 * dS[j];
      accP[j] += 2.0 * dP[j];
      St[j] = S[j] + dt * dS[j];
      Pt[j] = P[j] + dt * dP[j];
    }
    deriv(t + dt, St, Pt, dS, dP, omega_tmp);
    const double h6 = dt / 6.0;
    for (std::size_t j = 0; j < n; ++j) {
      S[j] += h6 * (accS[j] + dS[j]);
      P[j] += h6 * (accP[j] + dP[j]);
    }
  }
  return ts;
}

// ---------------------------------------------------------------------------
// Full four-level model with populations.

namespace detail {

struct FourLevelNode {
  double r11 = 0.5, r22 = 0.5, r33 = 0.0, r44 = 0.0;
  cd r32 = 0.0, r41 = 0.0;
};

inline FourLevelNode axpy(const FourLevelNode& y, double h, const FourLevelNode& k) {
  return {y.r11 + h * k.r11, y.r22 + h * k.r22, y.r33 + h * k.r33,
          y.r44 + h * k.r44, y.r32 + h * k.r32, y.r41 + h * k.r41};
}

inline void accumulate(FourLevelNode& acc, double w, const FourLevelNode& k) {
  acc.r11 += w * k.r11;
  acc.r22 += w * k.r22;
  acc.r33 += w * k.r33;
  acc.r44 += w * k.r44;
  acc.r32 += w * k.r32;
  acc.r41 += w * k.r41;
}

/// Im(a * conj(b))
inline double im_conj(cd a, cd b) { return a.imag() * b.real() - a.real() * b.imag(); }

}  // namespace detail

inline TimeSeries run_full(const PulseTrain& train, const std::vector<InputPulse>& inputs,
                           const TargetParams& target, const Grid& grid,
                           const SolverOptions& opts = {}, const FullObserver& observer = {}) {
  detail::check_inputs(train, inputs, target, grid, opts);
  detail::require_scalar_geometry(train, inputs);
  using Node = detail::FourLevelNode;

  const double c13 = std::abs(clebsch_gordan(0.5, -0.5));
  const double c24 = std::abs(clebsch_gordan(-0.5, 0.5));
  const double c14 = std::abs(clebsch_gordan(-0.5, -0.5));
  const double c23 = std::abs(clebsch_gordan(0.5, 0.5));
  const double gamma = opts.decay ? opts.isotope.decay_rate : 0.0;
  const double half_gamma = 0.5 * gamma;
  const double beta = target.beta();

  const std::size_t n = static_cast<std::size_t>(grid.n_z) + 1;
  const double dz = grid.dz(target.length);
  const double dt = grid.dt;
  const long steps = grid.steps();
  const double bound = detail::coherence_bound(train, inputs, kCouplingC, opts.instability_factor);

  std::vector<Node> y(n), yt(n), dy(n), acc(n);
  std::vector<cd> omega(n), omega_tmp(n);

  auto deriv = [&](double t, const std::vector<Node>& s, std::vector<Node>& d, std::vector<cd>& om) {
    const double delta = train.splitting(t);
    const cd om0 = detail::incident(inputs, t, Polarization::pi);
    cd cum = 0.0;
    om[0] = om0;
    cd src_prev = s[0].r41 / c14 + s[0].r32 / c23;
    for (std::size_t j = 0;; ++j) {
      const Node& x = s[j];
      const cd w = om[j];
      const double p41 = detail::im_conj(w, x.r41);
      const double p32 = detail::im_conj(w, x.r32);
      Node& k = d[j];
      k.r11 = gamma * (c13 * c13 * x.r33 + c14 * c14 * x.r44) + c14 * p41;
      k.r22 = gamma * (c23 * c23 * x.r33 + c24 * c24 * x.r44) + c23 * p32;
      k.r33 = -gamma * x.r33 - c23 * p32;
      k.r44 = -gamma * x.r44 - c14 * p41;
      // Delta_{3->2} = -Delta, Delta_{4->1} = +Delta
      k.r32 = detail::times_i(delta * x.r32) - half_gamma * x.r32 -
              detail::times_i((0.5 * c23 * (x.r33 - x.r22)) * w);
      k.r41 = -detail::times_i(delta * x.r41) - half_gamma * x.r41 -
              detail::times_i((0.5 * c14 * (x.r44 - x.r11)) * w);
      if (j + 1 == n) break;
      const cd src = s[j + 1].r41 / c14 + s[j + 1].r32 / c23;
      cum += (0.5 * dz) * (src_prev + src);
      src_prev = src;
      om[j + 1] = om0 + detail::times_i(beta * cum);
    }
  };

  TimeSeries ts = detail::make_series(train, target, grid, opts, "full", steps, false);
  FullField snapshot;
  snapshot.dz = dz;

  for (long k = 0; k < steps; ++k) {
    const double t = k * dt;
    deriv(t, y, dy, omega);
    if (k % opts.output_stride == 0) {
      ts.t.push_back(t);
      ts.omega_x.push_back(omega[n - 1]);
      ts.input_x.push_back(omega[0]);
      if (opts.record_coherences) {
        ts.rho_s.push_back(y[n - 1].r41 - y[n - 1].r32);
        ts.rho_p.push_back(y[n - 1].r41 + y[n - 1].r32);
      }
      double m = 0.0;
      for (const auto& x : y) m = std::max({m, std::abs(x.r32), std::abs(x.r41)});
      detail::check_stability(t, m, bound, opts.isotope.decay_rate);
      if (observer) {
        snapshot.r11.resize(n);
        snapshot.r22.resize(n);
        snapshot.r33.resize(n);
        snapshot.r44.resize(n);
        snapshot.r32.resize(n);
        snapshot.r41.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
          snapshot.r11[j] = y[j].r11;
          snapshot.r22[j] = y[j].r22;
          snapshot.r33[j] = y[j].r33;
          snapshot.r44[j] = y[j].r44;
          snapshot.r32[j] = y[j].r32;
          snapshot.r41[j] = y[j].r41;
        }
        snapshot.omega = omega;
        observer(t, snapshot);
      }
    }
    const double h2 = 0.5 * dt;
    for (std::size_t j = 0; j < n; ++j) {
      acc[j] = dy[j];
      yt[j] = detail::axpy(y[j], h2, dy[j]);
    }
    deriv(t + h2, yt, dy, omega_tmp);
    for (std::size_t j = 0; j < n; ++j) {
      detail::accumulate(acc[j], 2.0, dy[j]);
      yt[j] = detail::axpy(y[j], h2, dy[j]);
    }
    deriv(t + h2, yt, dy, omega_tmp);
    for (std::size_t j = 0; j < n; ++j) {
      detail::accumulate(acc[j], 2.0, dy[j]);
      yt[j] = detail::axpy(y[j], dt, dy[j]);
    }
    deriv(t + dt, yt, dy, omega_tmp);
    for (std::size_t j = 0; j < n; ++j) {
      detail::accumulate(acc[j], 1.0, dy[j]);
      y[j] = detail::axpy(y[j], dt / 6.0, acc[j]);
    }
  }
  return ts;
}

// ---------------------------------------------------------------------------
// Echo segmentation

struct EchoReport {
  int index = 0;
  double t_begin = 0.0;
  double t_end = 0.0;
  double peak_time = 0.0;
  cd peak_x = 0.0;
  cd peak_y = 0.0;
  double peak_amplitude = 0.0;  // sqrt of the peak intensity
  int sign = 0;                 // sign of Re of the dominant component at the peak
  double centroid = 0.0;
  double fwhm = 0.0;
  double energy = 0.0;
  double energy_x = 0.0;
  double energy_y = 0.0;
  double efficiency = 0.0;  // energy relative to the total incident energy

  double sigma_fraction() const { return energy > 0.0 ? energy_y / energy : 0.0; }
};

/// Full width at half maximum of samples y on an even grid with spacing h,
/// with linear interpolation of both half-crossings. Zero if y has no positive peak.
inline double fwhm_of(const std::vector<double>& y, double h) {
  if (y.empty()) return 0.0;
  const auto it = std::max_element(y.begin(), y.end());
  if (!(*it > 0.0)) return 0.0;
  const double half = 0.5 * *it;
  const std::size_t k = static_cast<std::size_t>(it - y.begin());
  std::size_t i = k;
  while (i > 0 && y[i] > half) --i;
  std::size_t j = k;
  while (j + 1 < y.size() && y[j] > half) ++j;
  double left = static_cast<double>(i);
  if (y[i] <= half && y[i + 1] != y[i]) left = i + (half - y[i]) / (y[i + 1] - y[i]);
  double right = static_cast<double>(j);
  if (y[j] <= half && y[j - 1] != y[j]) right = (j - 1) + (half - y[j - 1]) / (y[j] - y[j - 1]);
  return (right - left) * h;
}

/// Window boundaries sit at midpoints between consecutive magnetic-pulse centers.
inline std::vector<double> window_boundaries(const TimeSeries& ts, const PulseTrain& train) {
  const auto c = train.centers();
  const double lo = ts.t.empty() ? 0.0 : ts.t.front();
  const double hi = ts.t.empty() ? 0.0 : ts.t.back() + ts.dt_out;
  std::vector<double> b{lo};
  for (std::size_t i = 1; i < c.size(); ++i) b.push_back(0.5 * (c[i - 1] + c[i]));
  b.push_back(hi);
  return b;
}

inline std::vector<EchoReport> echo_segments(const TimeSeries& ts, const PulseTrain& train) {
  if (ts.size() == 0) throw InvalidArgument("empty time series");
  const auto b = window_boundaries(ts, train);
  const double e_in = ts.input_energy();
  std::vector<EchoReport> out;
  for (std::size_t w = 0; w + 1 < b.size(); ++w) {
    EchoReport r;
    r.index = static_cast<int>(w);
    r.t_begin = b[w];
    r.t_end = b[w + 1];
    std::vector<double> inten;
    std::size_t peak = ts.size();
    double best = -1.0;
    double moment = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      if (ts.t[i] < r.t_begin || ts.t[i] >= r.t_end) continue;
      const double ix = std::norm(ts.omega_x[i]);
      const double iy = ts.omega_y.empty() ? 0.0 : std::norm(ts.omega_y[i]);
      const double v = ix + iy;
      inten.push_back(v);
      r.energy_x += ix;
      r.energy_y += iy;
      moment += v * ts.t[i];
      if (v > best) {
        best = v;
        peak = i;
      }
    }
    r.energy_x *= ts.dt_out;
    r.energy_y *= ts.dt_out;
    r.energy = r.energy_x + r.energy_y;
    if (peak < ts.size() && best > 0.0) {
      r.peak_time = ts.t[peak];
      r.peak_x = ts.omega_x[peak];
      r.peak_y = ts.omega_y.empty() ? cd(0.0) : ts.omega_y[peak];
      r.peak_amplitude = std::sqrt(best);
      const cd dom = std::norm(r.peak_y) > std::norm(r.peak_x) ? r.peak_y : r.peak_x;
      r.sign = dom.real() > 0.0 ? 1 : (dom.real() < 0.0 ? -1 : 0);
      r.centroid = moment * ts.dt_out / r.energy;
      r.fwhm = fwhm_of(inten, ts.dt_out);
    } else {
      r.centroid = 0.5 * (r.t_begin + r.t_end);
    }
    r.efficiency = e_in > 0.0 ? r.energy / e_in : 0.0;
    out.push_back(r);
  }
  return out;
}

/// Energy of the field radiated by the sample, Omega(L,t) - Omega(0,t), over [t_begin, t_end).
/// Unlike the segment energy this excludes whatever part of the incident pulse
/// reaches into the window.
inline double scattered_energy(const TimeSeries& ts, double t_begin, double t_end) {
  double e = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts.t[i] < t_begin || ts.t[i] >= t_end) continue;
    e += std::norm(ts.omega_x[i] - ts.input_x[i]);
    if (!ts.omega_y.empty()) e += std::norm(ts.omega_y[i] - ts.input_y[i]);
  }
  return e * ts.dt_out;
}

}  // namespace nhms
