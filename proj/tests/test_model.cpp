#include <catch_amalgamated.hpp>

#include <cmath>

#include "nhms/model.hpp"
#include "oracles.hpp"

using namespace nhms;
using Catch::Approx;

TEST_CASE("clebsch_gordan: Delta m = 0 line of the reduced model") {
  CHECK(std::abs(clebsch_gordan(-0.5, -0.5)) == Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-14));
  CHECK(std::abs(clebsch_gordan(-0.5, -0.5)) == Approx(0.81650).margin(5e-6));
}

TEST_CASE("clebsch_gordan: stretched and mixed transitions") {
  CHECK(std::abs(clebsch_gordan(0.5, 1.5)) == Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(clebsch_gordan(0.5, -0.5)) == Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-14));
  CHECK(std::abs(clebsch_gordan(0.5, -0.5)) == Approx(0.57735).margin(5e-6));
}

TEST_CASE("clebsch_gordan agrees with the standard table for every allowed pair") {
  for (double mg : {-0.5, 0.5}) {
    for (double me : {-1.5, -0.5, 0.5, 1.5}) {
      if (std::abs(me - mg) > 1.0) continue;
      INFO("m_g = " << mg << ", m_e = " << me);
      CHECK(std::abs(clebsch_gordan(mg, me)) == Approx(oracle::cg_table(mg, me)).epsilon(1e-14));
    }
  }
}

TEST_CASE("clebsch_gordan sum rules") {
  // Completeness over the coupled pair for each excited sublevel.
  for (double me : {-1.5, -0.5, 0.5, 1.5}) {
    double s = 0.0;
    for (double mg : {-0.5, 0.5}) {
      if (std::abs(me - mg) <= 1.0) s += std::pow(clebsch_gordan(mg, me), 2);
    }
    CHECK(s == Approx(1.0).epsilon(1e-14));
  }
  // Per ground sublevel the squares add up to (2 I_e + 1)/(2 I_g + 1) = 2.
  for (double mg : {-0.5, 0.5}) {
    double s = 0.0;
    for (double me : {-1.5, -0.5, 0.5, 1.5}) {
      if (std::abs(me - mg) <= 1.0) s += std::pow(clebsch_gordan(mg, me), 2);
    }
    CHECK(s == Approx(2.0).epsilon(1e-14));
  }
  // The two lines that share excited level |3> (m_e = -1/2)
  const double c13 = clebsch_gordan(0.5, -0.5);
  const double c23 = clebsch_gordan(0.5, 0.5);
  CHECK(c13 * c13 + c23 * c23 == Approx(1.0).epsilon(1e-14));
}

TEST_CASE("clebsch_gordan rejects values outside the manifold") {
  CHECK_THROWS_AS(clebsch_gordan(1.5, 0.5), InvalidArgument);
  CHECK_THROWS_AS(clebsch_gordan(0.5, 2.5), InvalidArgument);
  CHECK_THROWS_AS(clebsch_gordan(-0.5, 1.5), InvalidArgument);
  CHECK_THROWS_AS(clebsch_gordan(0.25, 0.5), InvalidArgument);
}

TEST_CASE("splitting_from_field is linear and invertible") {
  const auto iso = IsotopeParams::fe57();
  CHECK(splitting_from_field(0.0, iso) == 0.0);
  const double b = 0.37;
  CHECK(splitting_from_field(2.0 * b, iso) == 2.0 * splitting_from_field(b, iso));

  const double target = 0.23186;
  const double field = field_from_splitting(target, iso);
  INFO("field for 0.23186 rad/ns: " << field << " T");
  CHECK(std::isfinite(field));
  CHECK(field > 0.0);
  CHECK(splitting_from_field(field, iso) == Approx(target).epsilon(1e-12));
  CHECK(field_from_splitting(splitting_from_field(field, iso), iso) == Approx(field).epsilon(1e-12));
  CHECK_THROWS_AS(splitting_from_field(std::nan(""), iso), InvalidArgument);
}

TEST_CASE("splitting per tesla uses the m = -1/2 sublevels and tabulated moments") {
  const auto iso = IsotopeParams::fe57();
  // mu_g = +0.09044 mu_N (I = 1/2), mu_e = -0.1549 mu_N (I = 3/2)
  const double expect = (-0.5 * (-0.1549 / 1.5) + 0.5 * (0.09044 / 0.5)) * iso.nuclear_magneton / iso.hbar;
  CHECK(splitting_per_tesla(iso) == Approx(expect).epsilon(1e-14));
}

TEST_CASE("amplitude_for_area") {
  CHECK(amplitude_for_area(9.0, 0.0) == 0.0);
  const double d0 = amplitude_for_area(9.0, kPi);
  CHECK(d0 == Approx(0.23186).epsilon(1e-4));
  // numerical quadrature of the envelope with this amplitude returns the area
  CHECK(oracle::gaussian_integral(d0, 9.0) == Approx(kPi).epsilon(1e-10));
  CHECK_THROWS_AS(amplitude_for_area(0.0, kPi), InvalidArgument);
  CHECK_THROWS_AS(amplitude_for_area(-1.0, kPi), InvalidArgument);
}

TEST_CASE("thickness at which A = 1 for a 9 ns pi pulse") {
  const double d0 = amplitude_for_area(9.0, kPi);
  const double gamma = 1.0 / 141.0;
  CHECK(d0 / (2.0 * gamma) == Approx(16.3).margin(0.1));
}

TEST_CASE("magnetic pulse envelopes integrate to their declared area") {
  for (double fwhm : {3.0, 4.5, 9.0, 18.0}) {
    for (double area : {0.5, kPi, 2.0 * kPi}) {
      const auto p = MagneticPulse::from_area(40.0, fwhm, area);
      const double q = oracle::integrate([&](double t) { return p.envelope(t); }, 40.0 - 20.0 * fwhm,
                                         40.0 + 20.0 * fwhm);
      CHECK(q == Approx(area).epsilon(1e-6));
      CHECK(p.envelope.integral() == Approx(area).epsilon(1e-14));
    }
  }
}

TEST_CASE("Gaussian envelope cumulative and phase integrals") {
  const GaussianEnvelope e{0.3, 50.0, 9.0};
  for (double t : {30.0, 45.0, 50.0, 61.3, 80.0}) {
    const double q = oracle::integrate([&](double s) { return e(s); }, e.start_time(), t);
    CHECK(e.phase(t) == Approx(q).epsilon(1e-9));
  }
  // start point sits where the intensity envelope is below 4e-4 of its peak
  CHECK(std::pow(e(e.start_time()) / e.amplitude, 2) < 4e-4);
  CHECK(e.start_time() == Approx(50.0 - 4.0 * 9.0 / std::sqrt(8.0 * kLn2)).epsilon(1e-14));
  CHECK(e.sigma() == Approx(9.0 / (2.0 * std::sqrt(kLn2))).epsilon(1e-14));
}

TEST_CASE("derived quantities are recomputable bit-for-bit") {
  const auto p = MagneticPulse::from_area(15.0, 9.0, kPi);
  CHECK(p.envelope.amplitude == amplitude_for_area(p.envelope.fwhm, p.area));
  CHECK_NOTHROW(p.validate());
  auto tampered = p;
  tampered.envelope.amplitude = std::nextafter(tampered.envelope.amplitude, 1.0);
  CHECK_THROWS_AS(tampered.validate(), InvalidArgument);

  const auto gamma = IsotopeParams::fe57().decay_rate;
  const auto t = TargetParams::make(16.0, gamma);
  CHECK(t.beta_length == 4.0 * gamma * 16.0);
  CHECK_NOTHROW(t.validate(gamma));
  auto bad = t;
  bad.beta_length *= 1.0 + 1e-15;
  CHECK_THROWS_AS(bad.validate(gamma), InvalidArgument);
  CHECK(TargetParams::make(16.0, gamma, 2.0).beta() == Approx(2.0 * gamma * 16.0).epsilon(1e-15));
}

TEST_CASE("target and grid invariants") {
  CHECK_THROWS_AS(TargetParams::make(-1.0, 0.01), InvalidArgument);
  CHECK_THROWS_AS(TargetParams::make(1.0, 0.01, 0.0), InvalidArgument);
  CHECK(TargetParams::make(0.0, 0.01).beta() == 0.0);

  Grid g;
  CHECK(g.n_z == 200);
  CHECK(g.dt == 0.01);
  CHECK(g.steps() == 30000);
  CHECK_NOTHROW(g.validate(amplitude_for_area(4.5, kPi)));
  CHECK_THROWS_AS(g.validate(6.0), InvalidArgument);
  g.n_z = 1;
  CHECK_THROWS_AS(g.validate(0.1), InvalidArgument);
  g = Grid{10, 0.0, 10.0};
  CHECK_THROWS_AS(g.validate(0.1), InvalidArgument);
}

TEST_CASE("isotope parameters") {
  const auto iso = IsotopeParams::fe57();
  CHECK(iso.decay_rate == Approx(1.0 / 141.0).epsilon(1e-15));
  CHECK(iso.decay_rate * iso.lifetime == Approx(1.0).epsilon(1e-15));
  CHECK(iso.natural_linewidth_neV == Approx(4.668).margin(0.01));
  CHECK_NOTHROW(iso.validate());
  auto bad = iso;
  bad.g_excited = bad.g_ground;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = IsotopeParams::with_lifetime(-5.0);
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("axis normalization") {
  const Vec3 v = normalized({3.0, 4.0, 0.0});
  CHECK(v[0] == Approx(0.6).epsilon(1e-15));
  CHECK(v[1] == Approx(0.8).epsilon(1e-15));
  CHECK(normalized(v) == v);
  CHECK(normalized(kAxisX) == kAxisX);
  CHECK_THROWS_AS(normalized({0.0, 0.0, 0.0}), InvalidArgument);
  const auto p = MagneticPulse::from_area(10.0, 9.0, kPi, {0.0, 2.0, 0.0});
  CHECK(p.axis == kAxisY);
}

TEST_CASE("weak-field bound on inputs") {
  const double gamma = 1.0 / 141.0;
  InputPulse ok{{1e-3 * gamma, 15.0, 9.0}, 0.0, Polarization::pi};
  CHECK_NOTHROW(ok.check_weak_field(gamma));
  InputPulse strong{{1e-2 * gamma, 15.0, 9.0}, 0.0, Polarization::pi};
  CHECK_THROWS_AS(strong.check_weak_field(gamma), InvalidArgument);
  CHECK_NOTHROW(strong.check_weak_field(gamma, 0.02));
  const InputPulse shifted{{2.0, 0.0, 9.0}, kPi / 2, Polarization::pi};
  CHECK(shifted(0.0).real() == Approx(0.0).margin(1e-15));
  CHECK(shifted(0.0).imag() == Approx(2.0).epsilon(1e-15));
}

TEST_CASE("pulse trains are ordered by center") {
  PulseTrain t({MagneticPulse::from_area(90.0, 9.0, kPi), MagneticPulse::from_area(15.0, 9.0, kPi)});
  REQUIRE(t.pulses.size() == 2);
  CHECK(t.centers() == std::vector<double>{15.0, 90.0});
  CHECK(t.uniform_axis());
  CHECK_NOTHROW(t.validate());
  CHECK(t.splitting(15.0) == Approx(amplitude_for_area(9.0, kPi)).epsilon(1e-6));
  t.pulses[1].axis = kAxisX;
  CHECK_FALSE(t.uniform_axis());
  std::swap(t.pulses[0], t.pulses[1]);
  CHECK_THROWS_AS(t.validate(), InvalidArgument);
}
