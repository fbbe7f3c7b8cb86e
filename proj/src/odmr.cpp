#include "nvmag/odmr.hpp"

#include "nvmag/error.hpp"
#include "nvmag/fit.hpp"
#include "nvmag/parallel.hpp"
#include "nvmag/units.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <tuple>

namespace nvmag::odmr {

using kinetics::KineticsParams;

void OdmrSpectrum::validate() const {
  if (freqs.size() != signal.size()) throw InvalidArgument("spectrum: freqs and signal lengths differ");
  for (std::size_t k = 1; k < freqs.size(); ++k)
    if (!(freqs[k] > freqs[k - 1])) throw InvalidArgument("spectrum: freqs must be strictly increasing");
  if (contrast < 0.0 || contrast > 1.0) throw InvalidArgument("spectrum: contrast outside [0, 1]");
}

void OdmrSpectrum::write_csv(const std::filesystem::path& path, const std::vector<std::string>& header_comments) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (const auto& line : header_comments) out << "# " << line << '\n';
  out << "freq_hz,signal\n" << std::setprecision(17);
  for (std::size_t k = 0; k < freqs.size(); ++k) out << freqs[k] << ',' << signal[k] << '\n';
}

double cw_linewidth(double gamma_1, double gamma_2_star, double gamma_p, double omega_r) {
  if (!(gamma_1 >= 0.0 && gamma_2_star >= 0.0 && gamma_p >= 0.0 && omega_r >= 0.0))
    throw InvalidArgument("cw_linewidth: inputs must be >= 0");
  const double gamma_2 = gamma_2_star + gamma_p;
  const double relax = 2.0 * gamma_1 + gamma_p;
  double power = 0.0;
  if (omega_r > 0.0) {
    if (relax == 0.0) throw SingularityError("cw_linewidth: 2 gamma_1 + gamma_p = 0 with omega_r > 0");
    power = omega_r * omega_r * gamma_2 / relax;
  }
  return std::sqrt(gamma_2 * gamma_2 + power) / two_pi;
}

double pulsed_odmr_linewidth(double t2_star) {
  if (!(t2_star > 0.0)) throw InvalidArgument("pulsed_odmr_linewidth: t2_star must be > 0");
  return 2.0 * std::sqrt(std::log(2.0)) / (pi * t2_star);
}

std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
  if (n < 2 || !(hi > lo)) throw InvalidArgument("linear_grid: need n >= 2 and hi > lo");
  std::vector<double> g(n);
  for (std::size_t k = 0; k < n; ++k) g[k] = lo + (hi - lo) * k / (n - 1);
  return g;
}

std::vector<double> default_grid(const KineticsParams& p, std::size_t n, double span_factor) {
  const double hw = cw_linewidth(p.gamma_1, p.gamma_2_star, p.gamma_p, p.omega_r);
  return linear_grid(-span_factor * hw, span_factor * hw, n);
}

namespace {

KineticsParams static_at(const KineticsParams& p, double detuning_hz) {
  KineticsParams q = p;
  q.delta_offset = nullptr;
  q.delta = hz_to_rad_s(detuning_hz);
  return q;
}

double fluorescence_at(const KineticsParams& p, double detuning_hz) {
  return kinetics::steady_state(static_at(p, detuning_hz)).fluorescence();
}

double mw_off_level(const KineticsParams& p) {
  KineticsParams q = static_at(p, 0.0);
  q.omega_r = 0.0;
  return kinetics::steady_state(q).fluorescence();
}

void check_grid(const std::vector<double>& g) {
  if (g.size() < 3) throw InvalidArgument("frequency grid needs at least 3 points");
  for (std::size_t k = 1; k < g.size(); ++k)
    if (!(g[k] > g[k - 1])) throw InvalidArgument("frequency grid must be strictly increasing");
}

}  // namespace

OdmrSpectrum cw_spectrum(const KineticsParams& p, const std::vector<double>& freq_grid) {
  p.validate();
  check_grid(freq_grid);
  const double expected_fwhm = 2.0 * cw_linewidth(p.gamma_1, p.gamma_2_star, p.gamma_p, p.omega_r);
  if (freq_grid.back() - freq_grid.front() < 4.0 * expected_fwhm)
    throw InvalidArgument("cw_spectrum: grid span must cover at least 4x the expected FWHM (" +
                          std::to_string(4.0 * expected_fwhm) + " Hz)");
  OdmrSpectrum s;
  s.freqs = freq_grid;
  s.signal.assign(freq_grid.size(), 0.0);
  parallel_for(freq_grid.size(), [&](std::size_t k) { s.signal[k] = fluorescence_at(p, freq_grid[k]); });
  s.reference = mw_off_level(p);
  const double lo = *std::min_element(s.signal.begin(), s.signal.end());
  s.contrast = std::clamp((s.reference - lo) / s.reference, 0.0, 1.0);
  if (p.omega_r > 0.0 && s.contrast > 1e-12) {
    const fit::Lorentzian f = fit::lorentzian_dip(s.freqs, s.signal);
    s.fwhm_hz = f.fwhm();
    s.center_hz = f.center;
    s.fitted = true;
  }
  return s;
}

std::pair<double, double> lockin_point(const KineticsParams& p, const mw::MWModulation& mod, double carrier_hz,
                                       const LockinOdmrOptions& opt) {
  if (mod.kind == mw::Kind::am) throw Unsupported("lock-in ODMR needs FM or PM modulation");
  mod.validate();
  KineticsParams q = static_at(p, carrier_hz);
  const kinetics::NVState init = kinetics::steady_state(q);
  q.delta_offset = [mod](double t) { return hz_to_rad_s(mw::instantaneous_detuning(mod, t)); };

  lockin::LockinConfig cfg;
  cfg.f_ref = mod.f_m;
  cfg.phase = pi / 2.0;  // reference follows cos(2 pi f_m t)
  cfg.cutoff = opt.cutoff_fraction * mod.f_m;
  cfg.filter_order = opt.filter_order;

  const int periods =
      static_cast<int>(std::ceil((cfg.settling_time() + opt.kinetic_settle) * mod.f_m)) + opt.average_periods;
  const double fs = opt.samples_per_period * mod.f_m;
  const std::size_t n = static_cast<std::size_t>(periods) * opt.samples_per_period;
  std::vector<double> times(n);
  for (std::size_t k = 0; k < n; ++k) times[k] = k / fs;
  const kinetics::Trajectory tr = kinetics::integrate(init, q, times, opt.tolerance);

  TimeTrace trace;
  trace.samples = tr.fluorescence;
  trace.sample_rate = fs;
  const lockin::Demodulated d = lockin::demodulate_xy(trace, cfg);
  return {lockin::tail_mean(d.x, cfg.f_ref, opt.average_periods),
          lockin::tail_mean(d.y, cfg.f_ref, opt.average_periods)};
}

OdmrSpectrum lockin_odmr_spectrum(const KineticsParams& p, const mw::MWModulation& mod,
                                  const std::vector<double>& freq_grid, const LockinOdmrOptions& opt) {
  p.validate();
  check_grid(freq_grid);
  if (mod.kind == mw::Kind::am) throw Unsupported("lock-in ODMR needs FM or PM modulation");
  if (mod.f_m >= freq_grid.back() - freq_grid.front())
    throw InvalidArgument("lock-in ODMR: f_m >= grid span makes the sweep meaningless");
  OdmrSpectrum s;
  s.freqs = freq_grid;
  s.signal.assign(freq_grid.size(), 0.0);
  std::vector<double> xs(freq_grid.size()), ys(freq_grid.size());
  parallel_for(freq_grid.size(), [&](std::size_t k) {
    std::tie(xs[k], ys[k]) = lockin_point(p, mod, freq_grid[k], opt);
  });
  // auto-phase: rotate onto the principal axis of the (X, Y) cloud, branch nearest the cosine reference
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += xs[k] * xs[k];
    syy += ys[k] * ys[k];
    sxy += xs[k] * ys[k];
  }
  const double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  s.lockin_phase = theta;
  for (std::size_t k = 0; k < xs.size(); ++k)
    s.signal[k] = -2.0 * (xs[k] * std::cos(theta) + ys[k] * std::sin(theta));
  s.reference = mw_off_level(p);
  const auto [mn, mx] = std::minmax_element(s.signal.begin(), s.signal.end());
  s.contrast = std::clamp((*mx - *mn) / s.reference, 0.0, 1.0);
  // dispersive profile: zero crossing between the extrema, width from extremum spacing (Lorentzian derivative)
  const std::size_t a = std::min(mn - s.signal.begin(), mx - s.signal.begin());
  const std::size_t b = std::max(mn - s.signal.begin(), mx - s.signal.begin());
  s.fwhm_hz = std::sqrt(3.0) * (s.freqs[b] - s.freqs[a]);
  s.center_hz = 0.5 * (s.freqs[a] + s.freqs[b]);
  for (std::size_t k = a; k < b; ++k) {
    if ((s.signal[k] <= 0.0) != (s.signal[k + 1] <= 0.0)) {
      const double u = s.signal[k] / (s.signal[k] - s.signal[k + 1]);
      s.center_hz = s.freqs[k] + u * (s.freqs[k + 1] - s.freqs[k]);
      break;
    }
  }
  return s;
}

OdmrSpectrum static_difference(const KineticsParams& p, double f_d, const std::vector<double>& freq_grid) {
  p.validate();
  check_grid(freq_grid);
  OdmrSpectrum s;
  s.freqs = freq_grid;
  s.signal.assign(freq_grid.size(), 0.0);
  parallel_for(freq_grid.size(), [&](std::size_t k) {
    s.signal[k] = fluorescence_at(p, freq_grid[k] - f_d) - fluorescence_at(p, freq_grid[k] + f_d);
  });
  s.reference = mw_off_level(p);
  const auto [mn, mx] = std::minmax_element(s.signal.begin(), s.signal.end());
  s.contrast = std::clamp((*mx - *mn) / s.reference, 0.0, 1.0);
  return s;
}

ScalarFactor scalar_factor(const OdmrSpectrum& s) {
  if (s.freqs.size() < 3 || s.freqs.size() != s.signal.size())
    throw InvalidArgument("scalar_factor: spectrum needs at least 3 points");
  ScalarFactor r;
  double scale = 0.0;
  for (double v : s.signal) scale = std::max(scale, std::abs(v));
  for (std::size_t k = 1; k + 1 < s.freqs.size(); ++k) {
    const double d = (s.signal[k + 1] - s.signal[k - 1]) / (s.freqs[k + 1] - s.freqs[k - 1]);
    if (std::abs(d) > std::abs(r.slope_per_hz)) {
      r.slope_per_hz = d;
      r.location_hz = s.freqs[k];
    }
  }
  const double span = s.freqs.back() - s.freqs.front();
  if (std::abs(r.slope_per_hz) * span <= 1e-14 * scale || r.slope_per_hz == 0.0) {
    r = ScalarFactor{};
    r.flat = true;
    r.warning = "flat spectrum: scalar factor is zero";
    return r;
  }
  r.per_tesla = std::abs(r.slope_per_hz) * gamma_nv;
  return r;
}

double FrequencyResponse::contrast_at(double f) const {
  if (f_m.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (f <= f_m.front()) return normalized.front();
  if (f >= f_m.back()) return normalized.back();
  for (std::size_t k = 1; k < f_m.size(); ++k) {
    if (f <= f_m[k]) {
      const double u = std::log(f / f_m[k - 1]) / std::log(f_m[k] / f_m[k - 1]);
      return normalized[k - 1] + u * (normalized[k] - normalized[k - 1]);
    }
  }
  return normalized.back();
}

FrequencyResponse frequency_response(const KineticsParams& p, const std::vector<double>& f_m_list,
                                     const FrequencyResponseOptions& opt) {
  p.validate();
  if (f_m_list.empty()) throw InvalidArgument("frequency_response: empty f_m list");
  for (double f : f_m_list)
    if (!(f > 0.0)) throw InvalidArgument("frequency_response: f_m values must be positive");
  if (!(p.omega_r > 0.0)) throw InvalidArgument("frequency_response: needs omega_r > 0");

  const double hw = cw_linewidth(p.gamma_1, p.gamma_2_star, p.gamma_p, p.omega_r);
  auto slope = [&](double f) {
    const double h = 1e-3 * hw;
    return (fluorescence_at(p, f + h) - fluorescence_at(p, f - h)) / (2.0 * h);
  };
  // max-slope point on the positive-detuning flank
  const int scan = 120;
  double best = hw, best_v = 0.0;
  for (int i = 1; i <= scan; ++i) {
    const double f = 6.0 * hw * i / scan;
    const double v = std::abs(slope(f));
    if (v > best_v) {
      best_v = v;
      best = f;
    }
  }
  const double step = 6.0 * hw / scan;
  const auto [f_op, neg] = boost::math::tools::brent_find_minima(
      [&](double f) { return -std::abs(slope(f)); }, std::max(best - step, 0.5 * step), best + step, 40);

  FrequencyResponse r;
  r.operating_detuning_hz = f_op;
  r.static_slope = -neg;
  r.deviation_hz = opt.deviation_fraction * std::sqrt(3.0) * f_op;
  r.f_m = f_m_list;
  std::sort(r.f_m.begin(), r.f_m.end());
  r.magnitude.assign(r.f_m.size(), 0.0);
  r.normalized.assign(r.f_m.size(), 0.0);
  parallel_for(r.f_m.size(), [&](std::size_t k) {
    const mw::MWModulation mod = mw::MWModulation::fm(0.0, r.f_m[k], r.deviation_hz);
    const auto [x, y] = lockin_point(p, mod, f_op, opt.lockin);
    r.magnitude[k] = std::hypot(x, y) / r.deviation_hz;
    r.normalized[k] = r.magnitude[k] / r.static_slope;
  });

  r.bandwidth_3db = std::numeric_limits<double>::quiet_NaN();
  const double level = 1.0 / std::sqrt(2.0);
  for (std::size_t k = 1; k < r.f_m.size(); ++k) {
    if (r.normalized[k - 1] >= level && r.normalized[k] < level) {
      const double u = (r.normalized[k - 1] - level) / (r.normalized[k - 1] - r.normalized[k]);
      r.bandwidth_3db = std::exp(std::log(r.f_m[k - 1]) + u * std::log(r.f_m[k] / r.f_m[k - 1]));
      break;
    }
  }
  return r;
}

}  // namespace nvmag::odmr
