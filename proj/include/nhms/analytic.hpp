#pragma once

// Closed-form predictions for the write/read protocol. All decay factors are
// referenced to the write-pulse center t0, i.e. exp(-Gamma (t - t0) / 2).

#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "nhms/error.hpp"
#include "nhms/model.hpp"
#include "nhms/solver.hpp"

namespace nhms::analytic {

/// Absorption parameter A = 2 Gamma xi / Delta0.
inline double absorption(double xi, double splitting_amplitude, double decay_rate) {
  if (splitting_amplitude == 0.0) throw InvalidArgument("splitting amplitude must be non-zero");
  return 2.0 * decay_rate * xi / splitting_amplitude;
}

inline double first_echo_prefactor(double a) { return 2.0 * a * std::exp(-a); }

/// First echo when the write and read pulses have different amplitudes. Reduces to
/// first_echo_prefactor(a) as a_read -> a_write.
inline double first_echo_prefactor(double a_write, double a_read) {
  const double d = a_read - a_write;
  if (std::abs(d) < 1e-6 * std::max(1.0, a_write)) {
    // series of (e^-aw - e^-ar)/(ar - aw) about d = 0
    return 2.0 * a_write * std::exp(-a_write) * (1.0 - 0.5 * d + d * d / 6.0);
  }
  return 2.0 * a_write * (std::exp(-a_write) - std::exp(-a_read)) / d;
}

inline double second_echo_prefactor(double a) { return 2.0 * (a * a - a) * std::exp(-a); }

/// Number of terms contributed at order j to the n-th echo, equal to C(n-2, j-1)
/// and evaluated by iterated prefix sums of the all-ones row.
inline std::uint64_t f_coeff(int n, int j) {
  if (n < 2) throw InvalidArgument("f_coeff needs n >= 2");
  if (j < 1 || j > n - 1) throw InvalidArgument("f_coeff needs 1 <= j <= n-1");
  if (j == 1) return 1;
  if (j == 2) return static_cast<std::uint64_t>(n - 2);
  // row[k] holds the (level)-fold nested sum with outer bound k
  std::vector<std::uint64_t> row(static_cast<std::size_t>(n - j) + 1, 1);
  for (int level = 0; level < j - 2; ++level) {
    std::uint64_t run = 0;
    for (auto& v : row) {
      run += v;
      v = run;
    }
  }
  // sum over the outermost index k = 1..n-j
  std::uint64_t total = 0;
  for (std::size_t k = 1; k < row.size(); ++k) total += row[k - 1];
  return total;
}

struct NthEchoPrefactor {
  int n = 0;
  double absorption = 0.0;
  double raw = 0.0;                 // series as published
  double calibration_factor = 0.0;  // raw * factor = physical prefactor
  double calibrated = 0.0;
  bool normalization_flag = false;  // raw differs from the explicit n = 2, 3 results
  std::string note;
};

/// Overall normalization of the general n-th echo series, fixed once against the
/// numerical solver in the thin-sample limit (see experiments::calibrate_nth_echo).
inline constexpr double kNthEchoCalibration = 0.5;

inline double nth_echo_raw(int n, double a) {
  if (n < 2) throw InvalidArgument("nth_echo needs n >= 2");
  double sum = 0.0;
  double term = 1.0;  // 2^j (-a)^j / j!
  for (int j = 1; j <= n - 1; ++j) {
    term *= 2.0 * (-a) / j;
    sum += term * static_cast<double>(f_coeff(n, j));
  }
  const double sign = (n - 1) % 2 ? -1.0 : 1.0;
  return 2.0 * sign * std::exp(-a) * sum;
}

inline NthEchoPrefactor nth_echo(int n, double xi, double splitting_amplitude, double decay_rate,
                                 double calibration = kNthEchoCalibration) {
  if (n < 2) throw InvalidArgument("nth_echo needs n >= 2");
  NthEchoPrefactor r;
  r.n = n;
  r.absorption = absorption(xi, splitting_amplitude, decay_rate);
  r.raw = nth_echo_raw(n, r.absorption);
  r.calibration_factor = calibration;
  r.calibrated = calibration * r.raw;
  const double a = r.absorption;
  const double explicit2 = first_echo_prefactor(a);
  const double explicit3 = second_echo_prefactor(a);
  const double raw2 = nth_echo_raw(2, a);
  const double raw3 = nth_echo_raw(3, a);
  r.normalization_flag = std::abs(raw2 - explicit2) > 1e-12 * (1.0 + std::abs(explicit2)) ||
                         std::abs(raw3 - explicit3) > 1e-12 * (1.0 + std::abs(explicit3));
  if (r.normalization_flag) {
    r.note = "general series is " + std::to_string(raw2 / explicit2) +
             "x the explicit first-echo result; calibrated value applies factor " +
             std::to_string(calibration);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Time-resolved predictions

struct FirstPassFields {
  cd rho_s;
  cd rho_p;
  cd omega;
};

/// Exit-face fields during and after the write pulse (pulse area assumed near pi).
inline FirstPassFields first_pass(double xi, const GaussianEnvelope& write, const InputPulse& input,
                                  const IsotopeParams& iso, double t, bool damping = true) {
  const double d0 = write.amplitude;
  const double a = absorption(xi, d0, iso.decay_rate);
  const cd om0 = std::polar(input.envelope.amplitude, input.phase);
  const double phi = write.phase(t);
  const double decay = damping ? std::exp(-0.5 * iso.decay_rate * (t - write.center)) : 1.0;
  const cd pre = om0 * (kCouplingC / (2.0 * d0)) * std::exp(-a) * decay;
  FirstPassFields f;
  f.rho_s = pre * (1.0 - std::cos(phi));
  f.rho_p = detail::times_i(pre * std::sin(phi));
  f.omega = input(t) - om0 * (1.0 - std::exp(-a)) * std::sin(phi) * decay;
  return f;
}

/// Stored spin coherence at the exit face once the write pulse is over, no decay.
inline double stored_coherence(double xi, double write_amplitude, double omega0, double decay_rate) {
  const double a = absorption(xi, write_amplitude, decay_rate);
  return kCouplingC * omega0 / write_amplitude * std::exp(-a);
}

struct EchoPrediction {
  int order = 1;  // 1 = first echo
  double prefactor = 0.0;
  double absorption = 0.0;
  GaussianEnvelope read;
  double reference_time = 0.0;  // write-pulse center
  double decay_rate = 0.0;      // zero when damping is off
  cd omega0 = 0.0;              // incident amplitude with carrier phase

  double decay(double t) const { return std::exp(-0.5 * decay_rate * (t - reference_time)); }

  /// Uses the exact Sin of the accumulated read phase.
  cd operator()(double t) const {
    return omega0 * (prefactor * std::sin(read.phase(t)) * decay(t));
  }

  /// Shape approximation Sin[phase] ~ Delta(t)/Delta0, for reporting only.
  cd approximate(double t) const {
    return omega0 * (prefactor * read(t) / read.amplitude * decay(t));
  }
};

inline EchoPrediction first_echo(double xi, const GaussianEnvelope& write, const GaussianEnvelope& read,
                                 const InputPulse& input, const IsotopeParams& iso, bool damping = true) {
  EchoPrediction p;
  p.order = 1;
  const double aw = absorption(xi, write.amplitude, iso.decay_rate);
  p.absorption = absorption(xi, read.amplitude, iso.decay_rate);
  p.prefactor = first_echo_prefactor(aw, p.absorption);
  p.read = read;
  p.reference_time = write.center;
  p.decay_rate = damping ? iso.decay_rate : 0.0;
  p.omega0 = std::polar(input.envelope.amplitude, input.phase);
  return p;
}

/// Second echo after three identical pi pulses.
inline EchoPrediction second_echo(double xi, const GaussianEnvelope& write, const GaussianEnvelope& read,
                                  const InputPulse& input, const IsotopeParams& iso,
                                  bool damping = true) {
  EchoPrediction p;
  p.order = 2;
  p.absorption = absorption(xi, read.amplitude, iso.decay_rate);
  p.prefactor = second_echo_prefactor(p.absorption);
  p.read = read;
  p.reference_time = write.center;
  p.decay_rate = damping ? iso.decay_rate : 0.0;
  p.omega0 = std::polar(input.envelope.amplitude, input.phase);
  return p;
}

// ---------------------------------------------------------------------------
// Efficiency

inline double echo_efficiency(double echo_energy, double input_energy) {
  if (!(input_energy > 0.0)) throw InvalidArgument("input energy must be positive");
  return echo_energy / input_energy;
}

/// Energy ratio between a segment of a simulated series and the incident pulse(s).
inline double echo_efficiency(const TimeSeries& ts, const EchoReport& echo) {
  return echo_efficiency(echo.energy, ts.input_energy());
}

/// Closed-form efficiency of a predicted echo, evaluated at the read center with the
/// reporting shape, so a matched read gives prefactor^2 * decay^2.
inline double echo_efficiency(const EchoPrediction& p, const InputPulse& input) {
  const double in = input.envelope.amplitude * input.envelope.amplitude * input.envelope.fwhm;
  const double d = p.decay(p.read.center);
  const double out = std::norm(p.omega0) * p.prefactor * p.prefactor * d * d * p.read.fwhm;
  return echo_efficiency(out, in);
}

}  // namespace nhms::analytic
