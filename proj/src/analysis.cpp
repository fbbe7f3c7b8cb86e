#include "nvmag/analysis.hpp"

#include "fft.hpp"
#include "nvmag/error.hpp"
#include "nvmag/units.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <iomanip>
#include <numeric>

namespace nvmag::analysis {

namespace {

// Least-squares mean and slope about the centre time tm.
std::pair<double, double> fit_line(const std::vector<double>& y, double fs, double tm) {
  const std::size_t n = y.size();
  long double ym = 0.0L;
  for (double v : y) ym += v;
  ym /= n;
  long double sty = 0.0L, stt = 0.0L;
  for (std::size_t k = 0; k < n; ++k) {
    const long double dt = k / fs - tm;
    sty += dt * (y[k] - ym);
    stt += dt * dt;
  }
  return {static_cast<double>(ym), static_cast<double>(sty / stt)};
}

}  // namespace

Detrended detrend_linear(const TimeTrace& trace) {
  trace.validate();
  const std::size_t n = trace.size();
  if (n < 3) throw InvalidArgument("detrend_linear: need at least 3 samples");
  const double fs = trace.sample_rate;
  const double tm = 0.5 * (n - 1) / fs;
  Detrended d;
  d.residual = trace;
  double mean = 0.0;
  // second pass removes the rounding left by the first
  for (int pass = 0; pass < 2; ++pass) {
    const auto [ym, b] = fit_line(d.residual.samples, fs, tm);
    for (std::size_t k = 0; k < n; ++k) d.residual.samples[k] -= ym + b * (k / fs - tm);
    mean += ym;
    d.slope += b;
  }
  d.intercept = mean - d.slope * tm;
  return d;
}

void NoiseSpectrum::write_csv(const std::filesystem::path& path, const std::vector<std::string>& header_comments) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (const auto& line : header_comments) out << "# " << line << '\n';
  const std::string suffix = unit_suffix(unit);
  out << "freq_hz,amplitude" << (suffix.empty() ? "" : "_") << suffix << '\n' << std::setprecision(17);
  for (std::size_t k = 0; k < freqs.size(); ++k) out << freqs[k] << ',' << amplitude[k] << '\n';
}

NoiseSpectrum noise_spectrum(const TimeTrace& trace, std::optional<double> scalar_factor, Window window) {
  trace.validate();
  const std::size_t n = trace.size();
  std::vector<double> x = trace.samples;
  double gain = 1.0;
  if (window == Window::hann) {
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double w = 0.5 - 0.5 * std::cos(two_pi * k / n);
      x[k] *= w;
      sum += w;
    }
    gain = sum / n;
  }
  const auto spec = detail::rfft(x);
  NoiseSpectrum s;
  s.resolution = trace.sample_rate / n;
  s.measurement_time = n / trace.sample_rate;
  s.unit = trace.unit;
  s.freqs.resize(spec.size());
  s.amplitude.resize(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
    s.freqs[k] = k * s.resolution;
    s.amplitude[k] = (edge ? 1.0 : 2.0) * std::abs(spec[k]) / (n * gain);
  }
  if (scalar_factor && trace.unit != Unit::tesla) {
    if (!(*scalar_factor > 0)) throw InvalidArgument("noise_spectrum: scalar factor must be > 0");
    for (double& a : s.amplitude) a /= *scalar_factor;
    s.unit = Unit::tesla;
  }
  return s;
}

FieldFloor min_detectable_field(const NoiseSpectrum& spectrum, double f_lo, double f_hi) {
  if (!(f_hi >= f_lo)) throw InvalidArgument("min_detectable_field: band must satisfy f_lo <= f_hi");
  if (spectrum.freqs.empty() || f_lo < spectrum.freqs.front() || f_hi > spectrum.freqs.back())
    throw InvalidArgument("min_detectable_field: band outside the spectrum range");
  std::vector<double> v;
  for (std::size_t k = 0; k < spectrum.freqs.size(); ++k)
    if (spectrum.freqs[k] >= f_lo && spectrum.freqs[k] <= f_hi) v.push_back(spectrum.amplitude[k]);
  if (v.empty()) throw InvalidArgument("min_detectable_field: empty band");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  FieldFloor r;
  r.floor = m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
  r.eta = r.floor * std::sqrt(spectrum.measurement_time);
  r.f_lo = f_lo;
  r.f_hi = f_hi;
  r.bins = m;
  return r;
}

double volts_to_tesla(double volts, double scalar_factor) {
  if (!(scalar_factor > 0)) throw InvalidArgument("scalar factor must be > 0");
  return volts / scalar_factor;
}

double tone_amplitude(const TimeTrace& trace, double f) {
  trace.validate();
  const std::size_t n = trace.size();
  const double mean = std::accumulate(trace.samples.begin(), trace.samples.end(), 0.0) / n;
  long double re = 0.0L, im = 0.0L;
  for (std::size_t k = 0; k < n; ++k) {
    const double arg = two_pi * f * (static_cast<double>(k) / trace.sample_rate);
    const double v = trace.samples[k] - mean;
    re += v * std::cos(arg);
    im += v * std::sin(arg);
  }
  return 2.0 * std::hypot(static_cast<double>(re), static_cast<double>(im)) / n;
}

ToneRecovery recover_calibration_tones(const TimeTrace& trace, double carrier, const std::vector<double>& tone_freqs,
                                       lockin::LockinConfig cfg) {
  trace.validate();
  if (!(carrier > 0) || !(carrier < 0.5 * trace.sample_rate))
    throw InvalidArgument("recover_calibration_tones: carrier must lie below Nyquist");
  cfg.f_ref = carrier;
  cfg.output = lockin::Output::in_phase;
  if (!(cfg.cutoff < carrier)) throw InvalidArgument("recover_calibration_tones: cutoff must be below the carrier");
  const TimeTrace base = lockin::demodulate(trace, cfg);
  ToneRecovery r;
  r.baseband = noise_spectrum(base);
  for (double f : tone_freqs) {
    if (f < r.baseband.resolution)
      throw InvalidArgument("recover_calibration_tones: tone " + std::to_string(f) +
                            " Hz is below the frequency resolution (unresolvable)");
    r.freqs.push_back(f);
    r.amplitudes.push_back(tone_amplitude(base, f));
  }
  return r;
}

TimeTrace gradiometer_difference(const TimeTrace& ch1, const TimeTrace& ch2) {
  ch1.validate();
  ch2.validate();
  if (ch1.size() != ch2.size()) throw InvalidArgument("gradiometer_difference: channel lengths differ");
  if (ch1.sample_rate != ch2.sample_rate) throw InvalidArgument("gradiometer_difference: sample rates differ");
  TimeTrace d = ch1;
  for (std::size_t k = 0; k < d.size(); ++k) d.samples[k] = ch1.samples[k] - ch2.samples[k];
  return d;
}

double flux_gain_from_slopes(double slope_with_fg, double slope_without_fg) {
  if (slope_without_fg == 0.0) throw SingularityError("flux_gain_from_slopes: zero reference slope");
  return slope_with_fg / slope_without_fg;
}

double GaussianNoise::operator()() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // 53-bit uniforms in (0, 1)
  const double u1 = ((rng_() >> 11) + 0.5) * 0x1.0p-53;
  const double u2 = ((rng_() >> 11) + 0.5) * 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(two_pi * u2);
  has_spare_ = true;
  return r * std::cos(two_pi * u2);
}

TimeTrace synthetic_calibration_trace(const CalibrationSynth& cfg, std::uint64_t seed) {
  if (!(cfg.sample_rate > 0) || cfg.samples < 2) throw InvalidArgument("synthetic trace: bad sampling");
  GaussianNoise noise(seed);
  TimeTrace tr;
  tr.sample_rate = cfg.sample_rate;
  tr.unit = Unit::tesla;
  tr.samples.resize(cfg.samples);
  for (std::size_t k = 0; k < cfg.samples; ++k) {
    const double t = k / cfg.sample_rate;
    double m = 0.0;
    for (double f : cfg.tone_freqs) m += cfg.tone_amplitude * std::sin(two_pi * f * t);
    double v = m * std::sin(two_pi * cfg.carrier * t);
    for (double f : cfg.interferers) v += cfg.tone_amplitude * std::sin(two_pi * f * t);
    v += cfg.ramp_offset + cfg.ramp_slope * t + cfg.noise_sigma * noise();
    tr.samples[k] = v;
  }
  return tr;
}

lockin::LockinConfig calibration_lockin(double carrier) {
  lockin::LockinConfig c;
  c.f_ref = carrier;
  c.cutoff = 49.0;
  c.filter_order = 4;
  c.output = lockin::Output::in_phase;
  return c;
}

}  // namespace nvmag::analysis
