#include "nvmag/lockin.hpp"

#include "nvmag/error.hpp"
#include "nvmag/units.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nvmag::lockin {

void LockinConfig::validate() const {
  if (!(f_ref > 0.0)) throw InvalidArgument("lock-in f_ref must be > 0");
  if (!(cutoff > 0.0 && cutoff < f_ref)) throw InvalidArgument("lock-in cutoff must satisfy 0 < cutoff < f_ref");
  if (filter_order < 1) throw InvalidArgument("lock-in filter order must be >= 1");
  if (!std::isfinite(phase)) throw InvalidArgument("lock-in phase must be finite");
}

double LockinConfig::time_constant() const { return 1.0 / (two_pi * cutoff); }

double LockinConfig::settling_time() const { return 10.0 * time_constant(); }

Demodulated demodulate_xy(const TimeTrace& trace, const LockinConfig& cfg) {
  cfg.validate();
  trace.validate();
  if (!(trace.sample_rate > 4.0 * cfg.f_ref)) {
    std::ostringstream msg;
    msg << "sample rate " << trace.sample_rate << " Hz too low for f_ref " << cfg.f_ref
        << " Hz (2 f_ref mixing product aliases; need > " << 4.0 * cfg.f_ref << " Hz)";
    throw AliasingError(msg.str());
  }
  const double alpha = 1.0 - std::exp(-two_pi * cfg.cutoff / trace.sample_rate);
  std::vector<double> sx(cfg.filter_order, 0.0), sy(cfg.filter_order, 0.0);
  Demodulated out;
  out.x = trace;
  out.y = trace;
  out.x.unit = out.y.unit = trace.unit;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const double arg = two_pi * cfg.f_ref * trace.time(k) + cfg.phase;
    double x = 2.0 * trace.samples[k] * std::sin(arg);
    double y = 2.0 * trace.samples[k] * std::cos(arg);
    for (int s = 0; s < cfg.filter_order; ++s) {
      sx[s] += alpha * (x - sx[s]);
      sy[s] += alpha * (y - sy[s]);
      x = sx[s];
      y = sy[s];
    }
    out.x.samples[k] = x;
    out.y.samples[k] = y;
  }
  return out;
}

TimeTrace demodulate(const TimeTrace& trace, const LockinConfig& cfg) {
  Demodulated d = demodulate_xy(trace, cfg);
  switch (cfg.output) {
    case Output::in_phase: return std::move(d.x);
    case Output::quadrature: return std::move(d.y);
    case Output::magnitude: break;
  }
  TimeTrace r = std::move(d.x);
  for (std::size_t k = 0; k < r.size(); ++k) r.samples[k] = std::hypot(r.samples[k], d.y.samples[k]);
  return r;
}

double tail_mean(const TimeTrace& out, double f_ref, int periods) {
  const std::size_t n = static_cast<std::size_t>(std::llround(periods * out.sample_rate / f_ref));
  if (n == 0 || n > out.size()) throw InvalidArgument("tail_mean: trace shorter than the averaging window");
  double s = 0.0;
  for (std::size_t k = out.size() - n; k < out.size(); ++k) s += out.samples[k];
  return s / n;
}

std::vector<Segment> CERamseySchedule::segments() const {
  return {{t_pi2, pi / 2, false},  {tau_m, 0.0, false}, {t_pi2, pi / 2, false},   {tau_r, 0.0, true},
          {t_pi2, pi / 2, false},  {tau_m, 0.0, false}, {t_3pi2, 3 * pi / 2, false}, {tau_r, 0.0, true}};
}

double CERamseySchedule::readout_offset() const { return 2.0 * t_pi2 + tau_m; }

CERamseySchedule ce_ramsey_schedule(double omega_r, double tau_m, double t_seq) {
  if (!(omega_r > 0.0)) throw InvalidArgument("CE-Ramsey schedule needs omega_r > 0");
  if (!(tau_m >= 0.0) || !(t_seq > 0.0)) throw InvalidArgument("CE-Ramsey schedule needs tau_m >= 0, t_seq > 0");
  CERamseySchedule s;
  s.t_seq = t_seq;
  s.tau_m = tau_m;
  s.omega_r = omega_r;
  s.tau_r = (t_seq - 3.0 * pi / omega_r) / 2.0 - tau_m;
  if (s.tau_r < 0.0) {
    std::ostringstream msg;
    msg << "infeasible CE-Ramsey schedule: tau_r = " << s.tau_r << " s < 0; T_seq must exceed 2 tau_m + 3 pi/Omega_R = "
        << 2.0 * tau_m + 3.0 * pi / omega_r << " s";
    throw InfeasibleSchedule(msg.str());
  }
  s.t_pi2 = pi / (2.0 * omega_r);
  s.t_3pi2 = 3.0 * pi / (2.0 * omega_r);
  return s;
}

LockinConfig ce_ramsey_lockin(const CERamseySchedule& s) {
  LockinConfig c;
  c.f_ref = s.demod_frequency();
  c.cutoff = c.f_ref / 10.0;
  c.filter_order = 2;
  c.phase = -two_pi * s.readout_offset() / s.t_seq;
  return c;
}

CERamseyOutput simulate_ce_ramsey_output(const kinetics::KineticsParams& params, const CERamseySchedule& schedule,
                                         double detuning_hz, const LockinConfig& cfg, const CERamseyOptions& opt) {
  if (schedule.tau_r < 0.0) throw InfeasibleSchedule("CE-Ramsey schedule has tau_r < 0");
  cfg.validate();
  params.validate();

  kinetics::KineticsParams free = params;
  free.delta_offset = nullptr;
  free.delta = hz_to_rad_s(detuning_hz);
  free.omega_r = 0.0;
  kinetics::KineticsParams pulse = free;
  pulse.omega_r = schedule.omega_r;
  const ode::Mat a_free = kinetics::system_matrix(free, 0.0);
  const ode::Mat a_pulse = kinetics::system_matrix(pulse, 0.0);
  const ode::MatrixFn f_free = [&](double, ode::Mat& a) { a = a_free; };
  const ode::MatrixFn f_pulse = [&](double, ode::Mat& a) { a = a_pulse; };

  const double T = schedule.t_seq;
  const double fs = opt.samples_per_cycle / T;
  const int cycles = static_cast<int>(std::ceil((cfg.settling_time() + opt.kinetic_settle) / T)) + opt.average_cycles;
  const std::size_t n_samples = static_cast<std::size_t>(cycles) * opt.samples_per_cycle;

  TimeTrace trace;
  trace.sample_rate = fs;
  trace.samples.assign(n_samples, 0.0);

  const auto segs = schedule.segments();
  std::vector<double> last_h(segs.size(), 0.0);
  ode::Vec y = kinetics::steady_state(free).to_vector();
  std::size_t next = 0;
  std::vector<double> times;
  for (int c = 0; c < cycles; ++c) {
    const double c0 = c * T;
    double offset = 0.0;
    for (std::size_t i = 0; i < segs.size(); ++i) {
      const double start = c0 + offset;
      offset += segs[i].duration;
      const double end = (i + 1 == segs.size()) ? c0 + T : c0 + offset;
      if (!(end > start)) continue;
      times.clear();
      std::vector<std::size_t> idx;
      while (next < n_samples && static_cast<double>(next) / fs < end) {
        times.push_back(std::max(start, static_cast<double>(next) / fs));
        idx.push_back(next++);
      }
      times.push_back(end);
      ode::Options o;
      o.rtol = opt.tolerance;
      o.atol = std::min(1e-14, opt.tolerance * 1e-5);
      o.h_init = last_h[i] > 0.0 ? std::min(last_h[i], end - start) : 0.0;
      ode::Stats st;
      y = ode::integrate_linear(
          segs[i].rotation > 0.0 ? f_pulse : f_free, start, y, times, o,
          [&](std::size_t k, double, const ode::Vec& v) {
            if (k < idx.size()) trace.samples[idx[k]] = v[3] + v[4] + v[5];
          },
          &st);
      last_h[i] = st.last_h;
    }
  }

  const Demodulated d = demodulate_xy(trace, cfg);
  CERamseyOutput out;
  out.in_phase = tail_mean(d.x, cfg.f_ref, opt.average_cycles);
  out.quadrature = tail_mean(d.y, cfg.f_ref, opt.average_cycles);
  out.cycles = cycles;
  return out;
}

double ce_ramsey_scalar_factor(const kinetics::KineticsParams& params, const CERamseySchedule& schedule,
                               const LockinConfig& cfg, const CERamseyOptions& opt) {
  if (!(schedule.tau_m > 0.0)) throw InvalidArgument("scalar factor needs tau_m > 0");
  const double q = 1.0 / (4.0 * schedule.tau_m);
  const double eps = 1.0 / (200.0 * schedule.tau_m);
  const double hi = simulate_ce_ramsey_output(params, schedule, q + eps, cfg, opt).in_phase;
  const double lo = simulate_ce_ramsey_output(params, schedule, q - eps, cfg, opt).in_phase;
  return std::abs(hi - lo) / (2.0 * eps) * gamma_nv;
}

}  // namespace nvmag::lockin
