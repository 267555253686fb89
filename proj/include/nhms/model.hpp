#pragma once

// Physical constants, level structure and pulse definitions for a 57Fe target
// driven by pulsed hyperfine magnetic splitting. Units: time in ns, angular
// rates in rad/ns, magnetic field in tesla.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "nhms/error.hpp"

namespace nhms {

using cd = std::complex<double>;
using Vec3 = std::array<double, 3>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kLn2 = std::numbers::ln2;

namespace constants {
// CODATA 2018
inline constexpr double hbar_eV_ns = 6.582119569e-7;
inline constexpr double nuclear_magneton_eV_per_T = 3.1524512550e-8;
}  // namespace constants

inline double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

/// Unit vector along v. Vectors already unit to within rounding are returned
/// unchanged, which keeps repeated normalization idempotent.
inline Vec3 normalized(const Vec3& v) {
  const double n = norm(v);
  if (!(n > 0.0) || !std::isfinite(n)) throw InvalidArgument("zero-length axis");
  if (std::abs(n - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon()) return v;
  return {v[0] / n, v[1] / n, v[2] / n};
}

inline constexpr Vec3 kAxisX{1.0, 0.0, 0.0};
inline constexpr Vec3 kAxisY{0.0, 1.0, 0.0};

// ---------------------------------------------------------------------------
// Isotope

struct IsotopeParams {
  double lifetime = 141.0;          // ns
  double decay_rate = 1.0 / 141.0;  // 1/ns
  double transition_energy_keV = 14.413;
  double natural_linewidth_neV = 0.0;
  double ground_spin = 0.5;
  double excited_spin = 1.5;
  /// Dimensionless Lande g-factors, g = mu / (I mu_N).
  double g_ground = 0.09044 / 0.5;
  double g_excited = -0.1549 / 1.5;
  double nuclear_magneton = constants::nuclear_magneton_eV_per_T;
  double hbar = constants::hbar_eV_ns;

  static IsotopeParams fe57() { return with_lifetime(141.0); }

  /// Rate and linewidth are derived from the lifetime so Gamma * tau0 == 1.
  static IsotopeParams with_lifetime(double lifetime_ns, double g_ground = 0.09044 / 0.5,
                                     double g_excited = -0.1549 / 1.5) {
    IsotopeParams p;
    p.lifetime = lifetime_ns;
    p.decay_rate = 1.0 / lifetime_ns;
    p.natural_linewidth_neV = p.hbar * p.decay_rate * 1e9;
    p.g_ground = g_ground;
    p.g_excited = g_excited;
    return p;
  }

  void validate() const {
    if (!(lifetime > 0.0) || !std::isfinite(lifetime)) throw InvalidArgument("lifetime must be positive");
    if (std::abs(decay_rate * lifetime - 1.0) > 1e-12) {
      throw InvalidArgument("decay rate and lifetime are inconsistent");
    }
    if (ground_spin != 0.5 || excited_spin != 1.5) {
      throw InvalidArgument("level structure is fixed to I_g = 1/2, I_e = 3/2");
    }
    if (g_excited == g_ground) throw InvalidArgument("equal g-factors give no splitting");
  }

  bool operator==(const IsotopeParams&) const = default;
};

// ---------------------------------------------------------------------------
// Angular momentum

namespace detail {

inline double factorial(int n) {
  double r = 1.0;
  for (int k = 2; k <= n; ++k) r *= k;
  return r;
}

inline int twice(double m) {
  const double t = 2.0 * m;
  const double r = std::round(t);
  if (std::abs(t - r) > 1e-12) throw InvalidArgument("projection is not a half-integer");
  return static_cast<int>(r);
}

/// <j1 m1; j2 m2 | J M> by the Racah formula; all arguments are doubled.
inline double clebsch_gordan_twice(int j1, int m1, int j2, int m2, int J, int M) {
  if (m1 + m2 != M) return 0.0;
  if (std::abs(m1) > j1 || std::abs(m2) > j2 || std::abs(M) > J) return 0.0;
  if (J < std::abs(j1 - j2) || J > j1 + j2) return 0.0;
  if ((j1 + m1) % 2 || (j2 + m2) % 2 || (J + M) % 2) return 0.0;
  auto f = [](int twice_n) { return factorial(twice_n / 2); };
  const double pre = std::sqrt((J + 1) * f(J + j1 - j2) * f(J - j1 + j2) * f(j1 + j2 - J) /
                               f(j1 + j2 + J + 2));
  const double norm = std::sqrt(f(J + M) * f(J - M) * f(j1 - m1) * f(j1 + m1) * f(j2 - m2) *
                                f(j2 + m2));
  double sum = 0.0;
  for (int k = 0; k <= j1 + j2 + J; k += 2) {
    const int a = j1 + j2 - J - k;
    const int b = j1 - m1 - k;
    const int c = j2 + m2 - k;
    const int d = J - j2 + m1 + k;
    const int e = J - j1 - m2 + k;
    if (a < 0 || b < 0 || c < 0 || d < 0 || e < 0) continue;
    const double term = 1.0 / (f(k) * f(a) * f(b) * f(c) * f(d) * f(e));
    sum += ((k / 2) % 2 ? -term : term);
  }
  return pre * norm * sum;
}

}  // namespace detail

/// Coupling coefficient C(I_g I_e 1; m_g m_e M) of the M1 line between ground
/// sublevel m_g (I_g = 1/2) and excited sublevel m_e (I_e = 3/2), M = m_e - m_g.
inline double clebsch_gordan(double m_g, double m_e) {
  const int tg = detail::twice(m_g);
  const int te = detail::twice(m_e);
  if (std::abs(tg) != 1) throw InvalidArgument("ground projection must be +-1/2");
  if (std::abs(te) != 1 && std::abs(te) != 3) throw InvalidArgument("excited projection must be +-1/2 or +-3/2");
  const int tq = te - tg;
  if (std::abs(tq) > 2) throw InvalidArgument("|m_e - m_g| must not exceed 1");
  return detail::clebsch_gordan_twice(1, tg, 2, tq, 3, te);
}

// ---------------------------------------------------------------------------
// Splitting law

/// Transition detuning of the m_g = -1/2 -> m_e = -1/2 line per tesla (rad/ns/T).
inline double splitting_per_tesla(const IsotopeParams& iso) {
  constexpr double m_e4 = -0.5;
  constexpr double m_g1 = -0.5;
  return (m_e4 * iso.g_excited - m_g1 * iso.g_ground) * iso.nuclear_magneton / iso.hbar;
}

inline double splitting_from_field(double field_tesla, const IsotopeParams& iso) {
  if (!std::isfinite(field_tesla)) throw InvalidArgument("field must be finite");
  return splitting_per_tesla(iso) * field_tesla;
}

inline double field_from_splitting(double splitting, const IsotopeParams& iso) {
  return splitting / splitting_per_tesla(iso);
}

// ---------------------------------------------------------------------------
// Gaussian pulses

/// integral of exp(-2 ln2 (t/fwhm)^2) dt over the real line, divided by fwhm.
inline double gaussian_area_factor() { return std::sqrt(kPi / (2.0 * kLn2)); }

inline double amplitude_for_area(double fwhm, double area) {
  if (!(fwhm > 0.0) || !std::isfinite(fwhm)) throw InvalidArgument("fwhm must be positive");
  return area / (fwhm * gaussian_area_factor());
}

/// amplitude * exp(-2 ln2 ((t - center)/fwhm)^2); fwhm refers to the squared envelope.
struct GaussianEnvelope {
  double amplitude = 0.0;
  double center = 0.0;
  double fwhm = 1.0;

  double operator()(double t) const {
    const double x = (t - center) / fwhm;
    return amplitude * std::exp(-2.0 * kLn2 * x * x);
  }

  double integral() const { return amplitude * fwhm * gaussian_area_factor(); }

  /// Standard deviation of the envelope itself.
  double sigma() const { return fwhm / (2.0 * std::sqrt(kLn2)); }

  /// Standard deviation of the squared envelope.
  double intensity_sigma() const { return fwhm / std::sqrt(8.0 * kLn2); }

  /// Reference point for phase integrals, four intensity-sigmas before the peak.
  double start_time() const { return center - 4.0 * intensity_sigma(); }

  /// Integral of the envelope from -infinity to t.
  double cumulative(double t) const {
    return 0.5 * integral() * std::erfc(-(t - center) / (std::sqrt(2.0) * sigma()));
  }

  /// Integral of the envelope from start_time() to t.
  double phase(double t) const { return cumulative(t) - cumulative(start_time()); }

  void validate() const {
    if (!(fwhm > 0.0) || !std::isfinite(fwhm)) throw InvalidArgument("fwhm must be positive");
    if (!std::isfinite(amplitude) || !std::isfinite(center)) throw InvalidArgument("non-finite envelope");
  }

  bool operator==(const GaussianEnvelope&) const = default;
};

/// Splitting pulse. The amplitude is always derived from the declared area so it
/// can be recomputed exactly from the primaries.
struct MagneticPulse {
  GaussianEnvelope envelope;  // splitting Delta(t), rad/ns
  double area = 0.0;          // rad
  Vec3 axis = kAxisY;

  static MagneticPulse from_area(double center, double fwhm, double area, Vec3 axis = kAxisY) {
    return MagneticPulse{{amplitude_for_area(fwhm, area), center, fwhm}, area, normalized(axis)};
  }

  void validate() const {
    envelope.validate();
    if (!std::isfinite(area)) throw InvalidArgument("pulse area must be finite");
    if (envelope.amplitude != amplitude_for_area(envelope.fwhm, area)) {
      throw InvalidArgument("pulse amplitude does not match its area");
    }
    if (std::abs(norm(axis) - 1.0) > 1e-9) throw InvalidArgument("pulse axis must be a unit vector");
  }

  bool operator==(const MagneticPulse&) const = default;
};

enum class Polarization { pi, sigma };

inline const char* to_string(Polarization p) { return p == Polarization::pi ? "pi" : "sigma"; }

inline constexpr double kDefaultWeakFieldRatio = 1e-3;

struct InputPulse {
  GaussianEnvelope envelope;  // Rabi frequency Omega_p(0, t), rad/ns
  double phase = 0.0;
  Polarization polarization = Polarization::pi;

  cd operator()(double t) const { return std::polar(envelope(t), phase); }

  void check_weak_field(double decay_rate, double ratio = kDefaultWeakFieldRatio) const {
    envelope.validate();
    if (std::abs(envelope.amplitude) > ratio * decay_rate * (1.0 + 1e-12)) {
      throw InvalidArgument("input amplitude violates the weak-field bound");
    }
  }

  bool operator==(const InputPulse&) const = default;
};

struct PulseTrain {
  std::vector<MagneticPulse> pulses;

  PulseTrain() = default;
  explicit PulseTrain(std::vector<MagneticPulse> p) : pulses(std::move(p)) {
    std::stable_sort(pulses.begin(), pulses.end(), [](const auto& a, const auto& b) {
      return a.envelope.center < b.envelope.center;
    });
  }

  double splitting(double t) const {
    double d = 0.0;
    for (const auto& p : pulses) d += p.envelope(t);
    return d;
  }

  double max_amplitude() const {
    double m = 0.0;
    for (const auto& p : pulses) m = std::max(m, std::abs(p.envelope.amplitude));
    return m;
  }

  std::vector<double> centers() const {
    std::vector<double> c;
    c.reserve(pulses.size());
    for (const auto& p : pulses) c.push_back(p.envelope.center);
    return c;
  }

  bool uniform_axis() const {
    for (const auto& p : pulses) {
      if (p.axis != pulses.front().axis) return false;
    }
    return true;
  }

  void validate() const {
    for (std::size_t i = 0; i < pulses.size(); ++i) {
      pulses[i].validate();
      if (i > 0 && pulses[i].envelope.center < pulses[i - 1].envelope.center) {
        throw InvalidArgument("pulses must be ordered by center");
      }
    }
  }

  bool operator==(const PulseTrain&) const = default;
};

// ---------------------------------------------------------------------------
// Target and grid

/// beta = 4 Gamma xi / L; the product beta * L is what gets stored.
struct TargetParams {
  double resonant_thickness = 0.0;
  double length = 1.0;
  double beta_length = 0.0;

  static TargetParams make(double xi, double decay_rate, double length = 1.0) {
    if (!(xi >= 0.0) || !std::isfinite(xi)) throw InvalidArgument("resonant thickness must be >= 0");
    if (!(length > 0.0)) throw InvalidArgument("target length must be positive");
    return TargetParams{xi, length, 4.0 * decay_rate * xi};
  }

  double beta() const { return beta_length / length; }

  void validate(double decay_rate) const {
    if (!(resonant_thickness >= 0.0)) throw InvalidArgument("resonant thickness must be >= 0");
    if (!(length > 0.0)) throw InvalidArgument("target length must be positive");
    if (beta_length != 4.0 * decay_rate * resonant_thickness) {
      throw InvalidArgument("stored beta is inconsistent with the resonant thickness");
    }
  }

  bool operator==(const TargetParams&) const = default;
};

struct Grid {
  int n_z = 200;
  double dt = 0.01;
  double t_end = 300.0;

  long steps() const { return std::lround(t_end / dt); }

  double dz(double length) const { return length / n_z; }

  /// fastest_rate is the largest angular rate the integrator must follow.
  void validate(double fastest_rate) const {
    if (n_z < 2) throw InvalidArgument("grid needs at least two slabs");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("dt must be positive");
    if (!(t_end > 0.0) || !std::isfinite(t_end)) throw InvalidArgument("t_end must be positive");
    if (dt * fastest_rate > 0.05 + 1e-12) throw InvalidArgument("dt does not resolve the fastest rate; reduce dt");
  }

  bool operator==(const Grid&) const = default;
};

}  // namespace nhms
