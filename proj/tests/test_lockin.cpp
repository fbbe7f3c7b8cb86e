#include "nvmag/error.hpp"
#include "nvmag/fit.hpp"
#include "nvmag/lockin.hpp"
#include "nvmag/units.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace nvmag;
using lockin::LockinConfig;

namespace {

TimeTrace tone(double fs, double duration, double f, double amp, double phase, double dc = 0.0) {
  TimeTrace t;
  t.sample_rate = fs;
  const auto n = static_cast<std::size_t>(duration * fs);
  t.samples.resize(n);
  for (std::size_t k = 0; k < n; ++k) t.samples[k] = dc + amp * std::sin(two_pi * f * k / fs + phase);
  return t;
}

LockinConfig config(double f_ref, double cutoff, int order, double phase = 0.0) {
  LockinConfig c;
  c.f_ref = f_ref;
  c.cutoff = cutoff;
  c.filter_order = order;
  c.phase = phase;
  return c;
}

double tail_peak(const TimeTrace& t, double from) {
  double m = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k)
    if (t.time(k) >= from) m = std::max(m, std::abs(t.samples[k]));
  return m;
}

}  // namespace

TEST_CASE("DC is rejected") {
  const auto cfg = config(1e3, 10.0, 2);
  const auto out = lockin::demodulate(tone(100e3, 0.5, 1e3, 0.0, 0.0, 3.0), cfg);
  CHECK(std::abs(lockin::tail_mean(out, cfg.f_ref, 20)) <= 1e-6);
}

TEST_CASE("matched tone settles to its amplitude") {
  const auto cfg = config(1e3, 10.0, 2, 0.4);
  const auto out = lockin::demodulate(tone(100e3, 1.5 * cfg.settling_time() + 0.02, 1e3, 1.0, 0.4), cfg);
  double worst = 0.0;
  for (std::size_t k = 0; k < out.size(); ++k)
    if (out.time(k) >= cfg.settling_time()) worst = std::max(worst, std::abs(out.samples[k] - 1.0));
  CHECK(worst <= 1e-3);

  auto q = cfg;
  q.output = lockin::Output::quadrature;
  const auto y = lockin::demodulate(tone(100e3, 0.5, 1e3, 1.0, 0.4), q);
  CHECK(std::abs(lockin::tail_mean(y, cfg.f_ref, 20)) <= 1e-3);

  auto m = cfg;
  m.output = lockin::Output::magnitude;
  m.phase = 1.3;
  const auto r = lockin::demodulate(tone(100e3, 0.5, 1e3, 2.0, 0.4), m);
  CHECK(lockin::tail_mean(r, cfg.f_ref, 20) == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("off-reference tone follows the filter roll-off") {
  for (int order : {1, 2, 4}) {
    const double fc = 10.0;
    const auto cfg = config(1e3, fc, order);
    auto m = cfg;
    m.output = lockin::Output::magnitude;
    const auto out = lockin::demodulate(tone(100e3, 2.0, 1e3 + 10 * fc, 1.0, 0.0), m);
    const double gain_db = 20.0 * std::log10(tail_peak(out, cfg.settling_time() * 2));
    const double predicted = -10.0 * order * std::log10(1.0 + 100.0);
    CHECK(gain_db == doctest::Approx(predicted).epsilon(0).scale(1).epsilon(2.0 / std::abs(predicted)));
    CHECK(gain_db <= -20.0 * order + 2.0);
  }
}

TEST_CASE("demodulation is linear") {
  const auto cfg = config(500.0, 20.0, 3, 0.2);
  const auto a = tone(20e3, 0.2, 500.0, 0.7, 0.1, 0.3);
  const auto b = tone(20e3, 0.2, 530.0, 1.9, 1.4, -0.2);
  TimeTrace s = a;
  for (std::size_t k = 0; k < s.size(); ++k) s.samples[k] = 2.0 * a.samples[k] - 0.5 * b.samples[k];
  const auto xa = lockin::demodulate_xy(a, cfg), xb = lockin::demodulate_xy(b, cfg), xs = lockin::demodulate_xy(s, cfg);
  double worst = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    worst = std::max(worst, std::abs(xs.x.samples[k] - (2.0 * xa.x.samples[k] - 0.5 * xb.x.samples[k])));
    worst = std::max(worst, std::abs(xs.y.samples[k] - (2.0 * xa.y.samples[k] - 0.5 * xb.y.samples[k])));
    scale = std::max(scale, std::abs(xs.x.samples[k]));
  }
  CHECK(worst <= 1e-12 * std::max(scale, 1.0));
}

TEST_CASE("undersampled input is rejected") {
  const auto cfg = config(1e3, 10.0, 2);
  CHECK_THROWS_AS(lockin::demodulate(tone(3.9e3, 0.1, 1e3, 1.0, 0.0), cfg), AliasingError);
  CHECK_THROWS_AS(config(1e3, 2e3, 1).validate(), InvalidArgument);
  CHECK_THROWS_AS(config(1e3, 10.0, 0).validate(), InvalidArgument);
}

TEST_CASE("CE-Ramsey schedule") {
  const auto s = lockin::ce_ramsey_schedule(hz_to_rad_s(4e6), 6.42e-6, 110e-6);
  CHECK(s.tau_r == doctest::Approx((110e-6 - 0.375e-6) / 2 - 6.42e-6).epsilon(1e-13));
  CHECK(std::abs(s.tau_r - 48.39e-6) <= 5e-9);
  CHECK(s.demod_frequency() == 1.0 / 110e-6);
  double sum = 0.0;
  int readouts = 0;
  for (const auto& seg : s.segments()) {
    sum += seg.duration;
    readouts += seg.readout_start ? 1 : 0;
  }
  CHECK(sum == doctest::Approx(110e-6).epsilon(1e-14));
  CHECK(readouts == 2);
  CHECK_THROWS_AS(lockin::ce_ramsey_schedule(hz_to_rad_s(4e6), 55e-6, 110e-6), InfeasibleSchedule);

  const auto cfg = lockin::ce_ramsey_lockin(s);
  CHECK(cfg.f_ref == s.demod_frequency());
  CHECK(cfg.cutoff == doctest::Approx(cfg.f_ref / 10));
}

TEST_CASE("CE-Ramsey fringe") {
  kinetics::KineticsParams p;
  p.omega_r = hz_to_rad_s(4e6);
  const auto s = lockin::ce_ramsey_schedule(p.omega_r, 6.42e-6, 110e-6);
  const auto cfg = lockin::ce_ramsey_lockin(s);

  const double x0 = lockin::simulate_ce_ramsey_output(p, s, 0.0, cfg).in_phase;
  const double xp = lockin::simulate_ce_ramsey_output(p, s, 2e3, cfg).in_phase;
  const double xm = lockin::simulate_ce_ramsey_output(p, s, -2e3, cfg).in_phase;
  CHECK(std::abs(xp - xm) <= 1e-6 * std::abs(x0));
  CHECK(std::abs(x0) > std::abs(xp));

  std::vector<double> d, x;
  for (double f = -300e3; f <= 300e3 + 1.0; f += 10e3) {
    d.push_back(f);
    x.push_back(lockin::simulate_ce_ramsey_output(p, s, f, cfg).in_phase);
  }
  const auto fit = fit::damped_sinusoid(d, x);
  CHECK(1.0 / fit.frequency == doctest::Approx(1.0 / 6.42e-6).epsilon(0.02));
}

TEST_CASE("CE-Ramsey scalar factor grows from low demodulation frequency") {
  kinetics::KineticsParams p;
  p.omega_r = hz_to_rad_s(4e6);
  auto sf = [&](double t_seq) {
    const auto s = lockin::ce_ramsey_schedule(p.omega_r, 6.42e-6, t_seq);
    return lockin::ce_ramsey_scalar_factor(p, s, lockin::ce_ramsey_lockin(s));
  };
  const double at_1k = sf(1e-3), at_2k = sf(500e-6);
  CHECK(at_1k > 0.0);
  CHECK(at_2k > 1.2 * at_1k);
}
