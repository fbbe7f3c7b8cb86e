#include "nvmag/error.hpp"
#include "nvmag/sensitivity.hpp"
#include "nvmag/units.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <doctest.h>

#include <cmath>
#include <random>

using namespace nvmag;
using namespace nvmag::sensitivity;

namespace {

double recovery_quad(const ReadoutGeometry& g, double a, double b) {
  auto f = [&](double t) { return -g.a_fl * std::exp(-t / g.tau_fl); };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-14);
}

double lia_quad(const ReadoutGeometry& g) {
  const double h = g.t_seq / 2;
  return std::abs(recovery_quad(g, g.t0 - h, g.t0) - recovery_quad(g, g.t0, g.t0 + h)) / h *
         std::exp(-g.tau_m / g.t2_star);
}

double gated_quad(const ReadoutGeometry& g) {
  const double h = g.t_seq / 2;
  return std::abs(recovery_quad(g, g.t0 - h, g.t0 - h + g.delta_t) - recovery_quad(g, g.t0, g.t0 + g.delta_t)) /
         g.delta_t * std::exp(-g.tau_m / g.t2_star);
}

}  // namespace

TEST_CASE("CW shot-noise limit") {
  CHECK(shot_noise_cw(0.77, 2.37e6, 1.0, 4.6e15, 1.0) == doctest::Approx(0.96e-12).epsilon(0.02));
  CHECK(shot_noise_cw(0.77, 2.37e6, 1.0 / 9.45, 4.6e15, 1.0) == doctest::Approx(9.1e-12).epsilon(0.02));
  CHECK(shot_noise_cw(0.77, 1e4, 0.01, 4e15, 1.0) == doctest::Approx(shot_noise_cw(0.77, 1e4, 0.01, 1e15, 1.0) / 2));
  CHECK_THROWS_AS(shot_noise_cw(0.77, 1e4, 0.0, 1e15, 1.0), SingularityError);
  CHECK_THROWS_AS(shot_noise_cw(0.77, 1e4, 0.01, 0.0, 1.0), SingularityError);
}

TEST_CASE("Ramsey shot-noise limit") {
  CHECK(shot_noise_ramsey_rate(0.0017, 4.6e15, 6.42e-6, 1.0) == doctest::Approx(7.7e-12).epsilon(0.02));
  const double n = 4.6e15 * 110e-6;
  CHECK(shot_noise_ramsey(0.0017, n, 6.42e-6, 110e-6, 4.0) ==
        doctest::Approx(shot_noise_ramsey(0.0017, n, 6.42e-6, 110e-6, 1.0) / 2));
  CHECK_THROWS_AS(shot_noise_ramsey(0.0017, n, 200e-6, 110e-6, 1.0), InvalidArgument);
  CHECK_THROWS_AS(shot_noise_ramsey(0.0, n, 6.42e-6, 110e-6, 1.0), SingularityError);
}

TEST_CASE("shot-noise scaling over random inputs") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int k = 0; k < 200; ++k) {
    const double c = 0.01 * u(rng), r = 1e15 * u(rng), t = u(rng), nu = 1e4 * u(rng), tm = 1e-6 * u(rng);
    const double ts = tm * (1.0 + u(rng));
    const double a = u(rng);
    CHECK(shot_noise_cw(0.77, nu, c, r, a * t) == doctest::Approx(shot_noise_cw(0.77, nu, c, r, t) / std::sqrt(a)));
    CHECK(shot_noise_cw(0.77, nu, c, a * r, t) == doctest::Approx(shot_noise_cw(0.77, nu, c, r, t) / std::sqrt(a)));
    CHECK(shot_noise_cw(0.77, nu, a * c, r, t) == doctest::Approx(shot_noise_cw(0.77, nu, c, r, t) / a));
    CHECK(shot_noise_ramsey(a * c, r * ts, tm, ts, t) == doctest::Approx(shot_noise_ramsey(c, r * ts, tm, ts, t) / a));
    CHECK(shot_noise_ramsey(c, a * r * ts, tm, ts, t) ==
          doctest::Approx(shot_noise_ramsey(c, r * ts, tm, ts, t) / std::sqrt(a)));
    CHECK(shot_noise_ramsey(c, r * ts, tm, ts, t) == doctest::Approx(shot_noise_ramsey_rate(c, r, tm, t)).epsilon(1e-13));
  }
}

TEST_CASE("photon rate from photodiode voltage") {
  CHECK(photon_rate_from_pd(3.76, 5100) == doctest::Approx(4.6e15).epsilon(0.02));
  CHECK(photon_rate_from_pd(0.0, 5100) == 0.0);
  CHECK(photon_rate_from_pd(1.0, 1.0) == doctest::Approx(6.241509e18).epsilon(1e-6));
  CHECK_THROWS_AS(photon_rate_from_pd(1.0, 0.0), InvalidArgument);
}

TEST_CASE("lock-in and gated readout contrast") {
  ReadoutGeometry g;
  CHECK(lia_contrast(g) == doctest::Approx(6.2e-3).epsilon(0.02));
  CHECK(lia_contrast(g) == doctest::Approx(lia_quad(g)).epsilon(1e-10));

  ReadoutGeometry z = g;
  z.a_fl = 0.0;
  CHECK(lia_contrast(z) == 0.0);

  ReadoutGeometry gt;
  gt.t_seq = 200e-6;
  gt.delta_t = 10e-6;
  gt.tau_m = 0.0;
  CHECK(gated_contrast(gt) == doctest::Approx(38.3e-3).epsilon(0.02));
  CHECK(gated_contrast(gt) / 1.88 == doctest::Approx(0.02).epsilon(0.05));
  CHECK(gated_contrast(gt) == doctest::Approx(gated_quad(gt)).epsilon(1e-10));

  for (double ts : {40e-6, 110e-6, 300e-6}) {
    ReadoutGeometry h = g;
    h.t_seq = ts;
    h.delta_t = ts / 2;
    h.t0 = ts / 2 + 50e-6;
    CHECK(gated_contrast(h) == lia_contrast(h));
  }
  ReadoutGeometry bad = g;
  bad.delta_t = 60e-6;
  CHECK_THROWS_AS(gated_contrast(bad), InvalidArgument);
}

TEST_CASE("equivalent contrast") {
  ReadoutGeometry g;
  g.delta_t = g.t_seq / 2;
  g.t_ref = g.t_seq;
  CHECK(equivalent_contrast(0.02, g) == doctest::Approx(0.02 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(equivalent_contrast(0.0, g) == 0.0);

  ReadoutGeometry a = g, b = g;
  b.t_ref = 2 * g.t_ref;
  CHECK(equivalent_contrast(0.02, b) > equivalent_contrast(0.02, a));
  b = g;
  b.t_seq = 2 * g.t_seq;
  CHECK(equivalent_contrast(0.02, b) < equivalent_contrast(0.02, a));
}

TEST_CASE("short cycles with half-cycle gates give the best equivalent contrast") {
  double best = 0.0, best_ts = 0.0, best_frac = 0.0;
  for (double ts : {20e-6, 40e-6, 80e-6, 110e-6, 150e-6, 200e-6, 400e-6, 800e-6}) {
    for (double frac : {0.05, 0.1, 0.25, 0.5}) {
      ReadoutGeometry g;
      g.t_seq = ts;
      g.delta_t = frac * ts;
      g.t0 = ts / 2 + 50e-6;
      g.tau_m = 0.0;
      const double c = equivalent_contrast(gated_contrast(g), g);
      if (c > best) {
        best = c;
        best_ts = ts;
        best_frac = frac;
      }
    }
  }
  CHECK(best_frac == 0.5);
  CHECK(best_ts >= 80e-6);
  CHECK(best_ts <= 150e-6);
}

TEST_CASE("coil noise budget") {
  CoilNoiseInputs in;
  CHECK(coil_noise(in) == doctest::Approx(0.8e-12).epsilon(0.1));
  CoilNoiseInputs off = in;
  off.temperature = 0.0;
  off.current = 0.0;
  CHECK(coil_noise(off) == 0.0);
  CoilNoiseInputs wide = in;
  wide.bandwidth = 4.0;
  CHECK(coil_noise(wide) == doctest::Approx(2 * coil_noise(in)));
  CHECK_THROWS_AS(coil_noise(CoilNoiseInputs{.r_coil = 0.0}), InvalidArgument);
}

TEST_CASE("volume-normalized sensitivity and reports") {
  CHECK(volume_normalized(15.9e-12, 0.125) == doctest::Approx(5.6e-12).epsilon(0.02));
  CHECK(volume_normalized(3e-12, 1.0) == 3e-12);
  CHECK(volume_normalized(2.0, 4.0) == 4.0);
  CHECK_THROWS_AS(volume_normalized(1.0, 0.0), InvalidArgument);

  const auto r = make_report(2.86e-12, 0.01, 6e4, 4.6e15, 4.0, 0.125);
  CHECK(r.delta_b == doctest::Approx(r.eta / 2.0));
  CHECK(r.eta_v == doctest::Approx(2.86e-12 * std::sqrt(0.125)));
  CHECK(r.enhanced_eta() == doctest::Approx(2.86e-12 / (2.67 * 1.3)));
}

TEST_CASE("CW optimizer") {
  const double t1 = 6e-3, t2 = 8.5e-6;
  SUBCASE("single-point grid") {
    const auto r = optimize_cw(t1, t2, {3e-4}, {hz_to_rad_s(23e3)});
    CHECK(r.map.size() == 1);
    CHECK(r.best.s == 3e-4);
    CHECK(r.best.omega_r == hz_to_rad_s(23e3));
    CHECK(r.best.delta_b == doctest::Approx(evaluate_cw(t1, t2, 3e-4, hz_to_rad_s(23e3)).delta_b).epsilon(1e-12));
  }
  SUBCASE("reference photon rate is reproduced at s_ref") {
    const auto c = evaluate_cw(t1, t2, 3e-4, hz_to_rad_s(23e3));
    CHECK(c.photon_rate == doctest::Approx(4.6e15).epsilon(1e-12));
    CHECK(c.contrast > 0.0);
  }
  SUBCASE("ties go to the lowest drive, then the lowest saturation") {
    const auto r = optimize_cw(t1, t2, {3e-4, 3e-4}, {hz_to_rad_s(20e3), hz_to_rad_s(20e3)});
    CHECK(r.best.s == 3e-4);
  }
  SUBCASE("argmin is stable under grid refinement") {
    std::vector<double> sg, og;
    for (int i = 0; i < 9; ++i) sg.push_back(1e-5 * std::pow(10.0, 2.5 * i / 8.0));
    for (int i = 0; i < 9; ++i) og.push_back(hz_to_rad_s(5e3 + 5e3 * i));
    const auto coarse = optimize_cw(t1, t2, sg, og);
    std::vector<double> sf, of;
    for (int i = 0; i < 17; ++i) sf.push_back(1e-5 * std::pow(10.0, 2.5 * i / 16.0));
    for (int i = 0; i < 17; ++i) of.push_back(hz_to_rad_s(5e3 + 2.5e3 * i));
    const auto fine = optimize_cw(t1, t2, sf, of);
    const double ds = std::pow(10.0, 2.5 / 8.0);
    CHECK(fine.best.s <= coarse.best.s * ds * (1 + 1e-12));
    CHECK(fine.best.s >= coarse.best.s / ds * (1 - 1e-12));
    CHECK(std::abs(fine.best.omega_r - coarse.best.omega_r) <= hz_to_rad_s(5e3) * (1 + 1e-12));
    CHECK(fine.best.delta_b <= coarse.best.delta_b);
  }
  CHECK_THROWS_AS(optimize_cw(t1, t2, {}, {1.0}), InvalidArgument);
}
