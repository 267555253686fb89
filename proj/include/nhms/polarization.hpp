#pragma once

// Sublevel-resolved model with both transverse field components and a
// quantization axis that may change between magnetic pulses.
//
// Basis (matching the level labels |1>..|6>):
//   ground  g0: m = -1/2, g1: m = +1/2
//   excited e0: m = +1/2, e1: m = -1/2, e2: m = +3/2, e3: m = -3/2
// The density matrix is held as blocks G = rho_gg (2x2), E = rho_ee (4x4) and
// X = rho_eg (4x2), expressed in the eigenbasis of the current axis.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "nhms/error.hpp"
#include "nhms/model.hpp"
#include "nhms/solver.hpp"

namespace nhms::polarization {

using Mat2 = Eigen::Matrix<cd, 2, 2>;
using Mat4 = Eigen::Matrix<cd, 4, 4>;
using Mat42 = Eigen::Matrix<cd, 4, 2>;
using Mat6 = Eigen::Matrix<cd, 6, 6>;

inline constexpr std::array<double, 2> kGroundM{-0.5, 0.5};
inline constexpr std::array<double, 4> kExcitedM{0.5, -0.5, 1.5, -1.5};

/// Spherical component q of the M1 transition operator, (T_q)_{e,g} = C(m_g, m_e)
/// whenever m_e - m_g = q.
inline Mat42 transition_operator(int q) {
  if (q < -1 || q > 1) throw InvalidArgument("q must be -1, 0 or +1");
  Mat42 t = Mat42::Zero();
  for (int e = 0; e < 4; ++e) {
    for (int g = 0; g < 2; ++g) {
      if (kExcitedM[e] - kGroundM[g] == q) t(e, g) = clebsch_gordan(kGroundM[g], kExcitedM[e]);
    }
  }
  return t;
}

/// Cartesian components of the transition operator in the lab z basis.
inline std::array<Mat42, 3> cartesian_operators() {
  const Mat42 tm = transition_operator(-1);
  const Mat42 tp = transition_operator(1);
  const double r = 1.0 / std::sqrt(2.0);
  return {(tm - tp) * r, (tm + tp) * cd(0.0, r), transition_operator(0)};
}

/// Wigner small-d element d^j_{m' m}(beta); all angular momenta given doubled.
inline double wigner_small_d(int j2, int mp2, int m2, double beta) {
  auto f = [](int twice_n) { return detail::factorial(twice_n / 2); };
  const double c = std::cos(0.5 * beta);
  const double s = std::sin(0.5 * beta);
  const double pre = std::sqrt(f(j2 + mp2) * f(j2 - mp2) * f(j2 + m2) * f(j2 - m2));
  double sum = 0.0;
  for (int k = 0; k <= 2 * j2; k += 2) {
    const int a = j2 + m2 - k;
    const int b = j2 - k - mp2;
    const int d = k - m2 + mp2;
    if (a < 0 || b < 0 || d < 0) continue;
    const double term = pre / (f(a) * f(k) * f(b) * f(d)) * std::pow(c, (2 * j2 - 2 * k + m2 - mp2) / 2) *
                        std::pow(s, (2 * k - m2 + mp2) / 2);
    sum += ((d / 2) % 2 ? -term : term);
  }
  return sum;
}

/// Columns are the sublevels quantized along `axis`, expanded in the lab z basis:
/// U_{m' m} = exp(-i m' phi) d_{m' m}(theta).
template <std::size_t N>
Eigen::Matrix<cd, static_cast<int>(N), static_cast<int>(N)> rotation_matrix(const std::array<double, N>& ms,
                                                                              const Vec3& axis) {
  const Vec3 n = normalized(axis);
  const double theta = std::acos(std::clamp(n[2], -1.0, 1.0));
  const double phi = std::atan2(n[1], n[0]);
  const int j2 = static_cast<int>(N) - 1;
  Eigen::Matrix<cd, static_cast<int>(N), static_cast<int>(N)> u;
  for (std::size_t a = 0; a < N; ++a) {
    for (std::size_t b = 0; b < N; ++b) {
      const int mp2 = detail::twice(ms[a]);
      const int m2 = detail::twice(ms[b]);
      u(a, b) = std::polar(wigner_small_d(j2, mp2, m2, theta), -0.5 * mp2 * phi);
    }
  }
  return u;
}

struct AxisFrame {
  Vec3 axis;
  Mat2 ug;
  Mat4 ue;
  std::array<Mat42, 3> v;  // lab x, y, z operators expressed in this frame

  explicit AxisFrame(const Vec3& a) : axis(normalized(a)) {
    ug = rotation_matrix(kGroundM, axis);
    ue = rotation_matrix(kExcitedM, axis);
    const auto lab = cartesian_operators();
    for (int k = 0; k < 3; ++k) v[k] = ue.adjoint() * lab[k] * ug;
  }
};

struct SublevelNode {
  Mat2 g = Mat2::Identity() * 0.5;
  Mat4 e = Mat4::Zero();
  Mat42 x = Mat42::Zero();
};

struct SublevelState {
  Vec3 axis = kAxisY;
  std::vector<SublevelNode> nodes;
  std::vector<cd> omega_x;
  std::vector<cd> omega_y;

  SublevelState() = default;
  SublevelState(std::size_t n, const Vec3& a) : axis(normalized(a)), nodes(n), omega_x(n), omega_y(n) {}

  /// 6x6 density matrix of node j in the current axis basis.
  Mat6 density(std::size_t j) const {
    const auto& s = nodes[j];
    Mat6 r;
    r.topLeftCorner<2, 2>() = s.g;
    r.bottomRightCorner<4, 4>() = s.e;
    r.bottomLeftCorner<4, 2>() = s.x;
    r.topRightCorner<2, 4>() = s.x.adjoint();
    return r;
  }

  /// Same matrix in the lab z-quantized basis.
  Mat6 lab_density(std::size_t j) const {
    const AxisFrame f(axis);
    Mat6 u = Mat6::Zero();
    u.topLeftCorner<2, 2>() = f.ug;
    u.bottomRightCorner<4, 4>() = f.ue;
    return u * density(j) * u.adjoint();
  }

  double max_trace_deviation() const {
    double m = 0.0;
    for (const auto& s : nodes) m = std::max(m, std::abs(s.g.trace() + s.e.trace() - 1.0));
    return m;
  }

  double max_hermiticity_deviation() const {
    double m = 0.0;
    for (const auto& s : nodes) {
      m = std::max(m, (s.g - s.g.adjoint()).cwiseAbs().maxCoeff());
      m = std::max(m, (s.e - s.e.adjoint()).cwiseAbs().maxCoeff());
    }
    return m;
  }

  double min_eigenvalue() const {
    double m = 1.0;
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      Mat6 r = density(j);
      r = 0.5 * (r + r.adjoint()).eval();
      Eigen::SelfAdjointEigenSolver<Mat6> es(r, Eigen::EigenvaluesOnly);
      m = std::min(m, es.eigenvalues().minCoeff());
    }
    return m;
  }
};

/// Re-expresses every node in the eigenbasis of new_axis: rho -> W rho W^dagger
/// with W = U(new)^dagger U(old), block-diagonal over ground and excited manifolds.
inline SublevelState rotate_quantization_axis(const SublevelState& state, const Vec3& new_axis) {
  const AxisFrame from(state.axis);
  const AxisFrame to(new_axis);
  const Mat2 wg = to.ug.adjoint() * from.ug;
  const Mat4 we = to.ue.adjoint() * from.ue;
  SublevelState out = state;
  out.axis = to.axis;
  for (auto& s : out.nodes) {
    s.g = wg * s.g * wg.adjoint();
    s.e = we * s.e * we.adjoint();
    s.x = we * s.x * wg.adjoint();
  }
  return out;
}

struct VectorDiagnostics {
  double max_trace_deviation = 0.0;
  double max_hermiticity_deviation = 0.0;
  double min_eigenvalue = 1.0;
  int axis_switches = 0;
};

using VectorObserver = std::function<void(double, const SublevelState&)>;

namespace detail {

inline SublevelNode axpy(const SublevelNode& y, double h, const SublevelNode& k) {
  SublevelNode r;
  r.g = y.g + h * k.g;
  r.e = y.e + h * k.e;
  r.x = y.x + h * k.x;
  return r;
}

inline void accumulate(SublevelNode& acc, double w, const SublevelNode& k) {
  acc.g += w * k.g;
  acc.e += w * k.e;
  acc.x += w * k.x;
}

struct AxisSwitch {
  double time;
  Vec3 axis;
};

inline std::vector<AxisSwitch> axis_schedule(const PulseTrain& train) {
  std::vector<AxisSwitch> s;
  for (std::size_t i = 1; i < train.pulses.size(); ++i) {
    if (train.pulses[i].axis != train.pulses[i - 1].axis) {
      s.push_back({0.5 * (train.pulses[i - 1].envelope.center + train.pulses[i].envelope.center),
                   train.pulses[i].axis});
    }
  }
  return s;
}

}  // namespace detail

inline TimeSeries run_vector(const PulseTrain& train, const std::vector<InputPulse>& inputs,
                             const TargetParams& target, const Grid& grid, const SolverOptions& opts = {},
                             VectorDiagnostics* diagnostics = nullptr, const VectorObserver& observer = {}) {
  const IsotopeParams& iso = opts.isotope;
  // Largest sublevel Zeeman rate relative to Delta, for the grid resolution check.
  const double zeeman_scale = 2.0 * (std::abs(iso.g_excited) * 1.5 + std::abs(iso.g_ground) * 0.5) /
                              std::abs(iso.g_excited - iso.g_ground);
  nhms::detail::check_inputs(train, inputs, target, grid, opts, std::max(1.0, zeeman_scale));
  for (const auto& p : train.pulses) {
    if (std::abs(p.axis[2]) > 1e-12) throw InvalidArgument("pulse axes must be perpendicular to z");
  }

  const std::size_t n = static_cast<std::size_t>(grid.n_z) + 1;
  const double dz = grid.dz(target.length);
  const double kappa = 1.5 * target.beta();
  const double gamma = opts.decay ? iso.decay_rate : 0.0;
  const double dt = grid.dt;
  const long steps = grid.steps();
  const double bound = nhms::detail::coherence_bound(train, inputs, 1.0, opts.instability_factor);

  std::array<double, 4> he_unit{};
  std::array<double, 2> hg_unit{};
  const double s_unit = -2.0 / (iso.g_excited - iso.g_ground);
  for (int e = 0; e < 4; ++e) he_unit[e] = iso.g_excited * kExcitedM[e] * s_unit;
  for (int g = 0; g < 2; ++g) hg_unit[g] = iso.g_ground * kGroundM[g] * s_unit;
  const std::array<Mat42, 3> tq{transition_operator(-1), transition_operator(0), transition_operator(1)};

  const auto schedule = detail::axis_schedule(train);
  std::size_t next_switch = 0;
  SublevelState state(n, train.pulses.empty() ? kAxisY : train.pulses.front().axis);
  auto frame = AxisFrame(state.axis);

  std::vector<SublevelNode> yt(n), dy(n), acc(n);
  std::vector<cd> ox_tmp(n), oy_tmp(n);

  auto deriv = [&](double t, const std::vector<SublevelNode>& y, std::vector<SublevelNode>& d,
                   std::vector<cd>& ox, std::vector<cd>& oy) {
    const double delta = train.splitting(t);
    Eigen::Matrix<double, 4, 1> he;
    Eigen::Matrix<double, 2, 1> hg;
    for (int e = 0; e < 4; ++e) he(e) = he_unit[e] * delta;
    for (int g = 0; g < 2; ++g) hg(g) = hg_unit[g] * delta;
    const Mat42& vx = frame.v[0];
    const Mat42& vy = frame.v[1];
    const cd ox0 = nhms::detail::incident(inputs, t, Polarization::pi);
    const cd oy0 = nhms::detail::incident(inputs, t, Polarization::sigma);
    ox[0] = ox0;
    oy[0] = oy0;
    cd cum_x = 0.0, cum_y = 0.0;
    cd sx_prev = vx.conjugate().cwiseProduct(y[0].x).sum();
    cd sy_prev = vy.conjugate().cwiseProduct(y[0].x).sum();
    const cd i_half(0.0, 0.5);
    for (std::size_t j = 0;; ++j) {
      const SublevelNode& s = y[j];
      SublevelNode& k = d[j];
      const Mat42 m = -oy[j] * vx + ox[j] * vy;
      // -i [H, rho] for diagonal H
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) k.g(a, b) = cd(0.0, -(hg(a) - hg(b))) * s.g(a, b);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) k.e(a, b) = cd(0.0, -(he(a) - he(b))) * s.e(a, b);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 2; ++b) k.x(a, b) = cd(-0.5 * gamma, -(he(a) - hg(b))) * s.x(a, b);
      k.x.noalias() += i_half * (m * s.g - s.e * m);
      const Mat2 mx = m.adjoint() * s.x;
      k.g += i_half * (mx - mx.adjoint());
      const Mat4 xm = m * s.x.adjoint();
      k.e += i_half * (xm - xm.adjoint());
      if (gamma != 0.0) {
        k.e -= gamma * s.e;
        for (const auto& t_q : tq) k.g.noalias() += gamma * (t_q.transpose() * s.e * t_q);
      }
      if (j + 1 == n) break;
      const cd sx = vx.conjugate().cwiseProduct(y[j + 1].x).sum();
      const cd sy = vy.conjugate().cwiseProduct(y[j + 1].x).sum();
      cum_x += (0.5 * dz) * (sx_prev + sx);
      cum_y += (0.5 * dz) * (sy_prev + sy);
      sx_prev = sx;
      sy_prev = sy;
      ox[j + 1] = ox0 + nhms::detail::times_i(kappa * cum_y);
      oy[j + 1] = oy0 - nhms::detail::times_i(kappa * cum_x);
    }
  };

  TimeSeries ts = nhms::detail::make_series(train, target, grid, opts, "vector", steps, true);
  VectorDiagnostics diag;
  const long eig_every = std::max<long>(1, steps / 16);

  for (long k = 0; k < steps; ++k) {
    const double t = k * dt;
    while (next_switch < schedule.size() && schedule[next_switch].time <= t) {
      state = rotate_quantization_axis(state, schedule[next_switch].axis);
      frame = AxisFrame(state.axis);
      ++next_switch;
      ++diag.axis_switches;
      diag.min_eigenvalue = std::min(diag.min_eigenvalue, state.min_eigenvalue());
    }
    deriv(t, state.nodes, dy, state.omega_x, state.omega_y);
    if (k % opts.output_stride == 0) {
      ts.t.push_back(t);
      ts.omega_x.push_back(state.omega_x[n - 1]);
      ts.omega_y.push_back(state.omega_y[n - 1]);
      ts.input_x.push_back(state.omega_x[0]);
      ts.input_y.push_back(state.omega_y[0]);
      double m = 0.0;
      for (const auto& s : state.nodes) m = std::max(m, s.x.cwiseAbs().maxCoeff());
      nhms::detail::check_stability(t, m, bound, iso.decay_rate);
      diag.max_trace_deviation = std::max(diag.max_trace_deviation, state.max_trace_deviation());
      diag.max_hermiticity_deviation =
          std::max(diag.max_hermiticity_deviation, state.max_hermiticity_deviation());
      if (observer) observer(t, state);
    }
    if (diagnostics && k % eig_every == 0) {
      diag.min_eigenvalue = std::min(diag.min_eigenvalue, state.min_eigenvalue());
    }
    const double h2 = 0.5 * dt;
    auto& y = state.nodes;
    for (std::size_t j = 0; j < n; ++j) {
      acc[j] = dy[j];
      yt[j] = detail::axpy(y[j], h2, dy[j]);
    }
    deriv(t + h2, yt, dy, ox_tmp, oy_tmp);
    for (std::size_t j = 0; j < n; ++j) {
      detail::accumulate(acc[j], 2.0, dy[j]);
      yt[j] = detail::axpy(y[j], h2, dy[j]);
    }
    deriv(t + h2, yt, dy, ox_tmp, oy_tmp);
    for (std::size_t j = 0; j < n; ++j) {
      detail::accumulate(acc[j], 2.0, dy[j]);
      yt[j] = detail::axpy(y[j], dt, dy[j]);
    }
    deriv(t + dt, yt, dy, ox_tmp, oy_tmp);
    for (std::size_t j = 0; j < n; ++j) {
      detail::accumulate(acc[j], 1.0, dy[j]);
      y[j] = detail::axpy(y[j], dt / 6.0, acc[j]);
    }
  }
  if (diagnostics) {
    diag.min_eigenvalue = std::min(diag.min_eigenvalue, state.min_eigenvalue());
    *diagnostics = diag;
  }
  return ts;
}

}  // namespace nhms::polarization
