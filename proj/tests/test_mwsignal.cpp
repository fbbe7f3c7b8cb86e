#include "nvmag/error.hpp"
#include "nvmag/mwsignal.hpp"

#include <doctest.h>

#include <cmath>

using namespace nvmag;
using mw::MWModulation;

namespace {

double bessel_series(double beta, int n) {
  double sum = 0.0;
  double term = std::pow(beta / 2.0, n) / std::tgamma(n + 1.0);
  for (int k = 0; k < 60; ++k) {
    sum += term;
    term *= -(beta / 2.0) * (beta / 2.0) / ((k + 1.0) * (n + k + 1.0));
  }
  return sum;
}

}  // namespace

TEST_CASE("instantaneous detuning") {
  CHECK(mw::instantaneous_detuning(MWModulation::fm(0, 9e3, 0.0), 1.234e-5) == 0.0);
  CHECK(mw::instantaneous_detuning(MWModulation::fm(0, 9e3, 18e3), 0.0) == doctest::Approx(18e3));
  const auto fm = MWModulation::fm(2.87e9, 9e3, 18e3);
  const auto pm = MWModulation::pm(2.87e9, 9e3, 2.0);
  for (int k = 0; k < 200; ++k) {
    const double t = k * 1.37e-6;
    CHECK(mw::instantaneous_detuning(pm, t) == doctest::Approx(mw::instantaneous_detuning(fm, t)).epsilon(1e-12));
    CHECK(std::abs(mw::instantaneous_detuning(fm, t)) <= 18e3 * (1 + 1e-15));
  }
  CHECK_THROWS_AS(mw::instantaneous_detuning(MWModulation::am(2.87e9, 1e3), 0.0), Unsupported);
}

TEST_CASE("Carson bandwidth") {
  CHECK(mw::carson_bandwidth(MWModulation::pm(0, 9e3, 2.0)) == doctest::Approx(54e3));
  CHECK(mw::carson_bandwidth(MWModulation::fm(0, 10e3, 40e3)) == doctest::Approx(100e3));
  CHECK(mw::carson_bandwidth(MWModulation::fm(0, 20e3, 80e3)) == doctest::Approx(200e3));
  CHECK(mw::carson_bandwidth(MWModulation::fm(0, 7e3, 0.0)) == doctest::Approx(14e3));
  CHECK_THROWS_AS(mw::carson_bandwidth(MWModulation::am(0, 1e3)), Unsupported);
}

TEST_CASE("Bessel sidebands") {
  const auto j = mw::bessel_sidebands(2.0, 3);
  REQUIRE(j.size() == 4);
  CHECK(std::abs(j[0] - 0.224) <= 1e-3);
  CHECK(std::abs(j[1] - 0.577) <= 1e-3);
  CHECK(std::abs(j[2] - 0.353) <= 1e-3);
  CHECK(std::abs(j[3] - 0.129) <= 1e-3);

  const auto z = mw::bessel_sidebands(0.0, 4);
  CHECK(z[0] == 1.0);
  for (int n = 1; n <= 4; ++n) CHECK(z[n] == 0.0);

  const auto one = mw::bessel_sidebands(1.0, 5);
  for (int n = 0; n <= 5; ++n) CHECK(std::abs(one[n] - bessel_series(1.0, n)) <= 1e-12);
  for (double beta : {0.3, 2.0, 7.5})
    for (int n = 0; n <= 8; ++n) CHECK(std::abs(mw::bessel_sidebands(beta, 8)[n] - bessel_series(beta, n)) <= 1e-10);

  for (int n = 1; n <= 5; ++n) CHECK(mw::sideband(2.0, -n) == doctest::Approx((n % 2 ? -1.0 : 1.0) * mw::sideband(2.0, n)));
  CHECK_THROWS_AS(mw::bessel_sidebands(1.0, -1), InvalidArgument);
}

TEST_CASE("sideband power sums to one") {
  for (double beta : {0.1, 1.0, 2.0, 4.0, 9.0, 10.0}) {
    const int n = static_cast<int>(std::ceil(beta)) + 10;
    CHECK(mw::sideband_power_fraction(beta, n) >= 0.9999);
    CHECK(mw::sideband_power_fraction(beta, n) <= 1.0 + 1e-12);
  }
}

TEST_CASE("Carson band captures the signal power") {
  for (double beta : {0.5, 1.0, 2.0, 4.0, 6.5, 10.0}) {
    CHECK(mw::carson_power_fraction(MWModulation::fm(0, 1e3, beta * 1e3)) >= 0.98);
    CHECK(mw::carson_power_fraction(MWModulation::pm(0, 1e3, beta)) ==
          doctest::Approx(mw::carson_power_fraction(MWModulation::fm(0, 1e3, beta * 1e3))));
  }
}

TEST_CASE("FM and PM with equal index share sideband magnitudes") {
  const auto fm = MWModulation::fm(0, 9e3, 18e3);
  const auto pm = MWModulation::pm(0, 9e3, 2.0);
  CHECK(fm.beta() == doctest::Approx(pm.beta()));
  for (int n = -6; n <= 6; ++n) CHECK(std::abs(mw::sideband(fm.beta(), n)) == std::abs(mw::sideband(pm.beta(), n)));
}

TEST_CASE("modulation validation") {
  CHECK_THROWS_AS(MWModulation::fm(0, 0.0, 1e3), InvalidArgument);
  CHECK_THROWS_AS(MWModulation::fm(0, 1e3, -1.0), InvalidArgument);
  MWModulation m = MWModulation::fm(0, 1e3, 2e3);
  m.phi_d = 3.0;
  CHECK_THROWS_AS(m.validate(), InvalidArgument);
}

TEST_CASE("AM two-tone description") {
  const auto t = mw::am_two_tone(2.87e9, 10e3);
  REQUIRE(t.tones.size() == 2);
  CHECK(t.tones[0].frequency == doctest::Approx(2.87e9 - 10e3).epsilon(1e-15));
  CHECK(t.tones[1].frequency == doctest::Approx(2.87e9 + 10e3).epsilon(1e-15));
  CHECK(t.tones[0].amplitude == t.tones[1].amplitude);
  CHECK_FALSE(t.degenerate);

  const auto s = mw::am_two_tone(2.87e9, 20e3);
  CHECK(s.tones[1].frequency - s.tones[0].frequency == doctest::Approx(40e3));
  CHECK(s.splitting);

  const auto d = mw::am_two_tone(2.87e9, 0.0);
  CHECK(d.degenerate);
  CHECK(d.tones.size() == 1);
}
