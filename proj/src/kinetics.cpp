#include "nvmag/kinetics.hpp"

#include "nvmag/error.hpp"
#include "nvmag/units.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

namespace nvmag::kinetics {

double NVState::population_sum() const { return std::accumulate(n.begin(), n.end(), 0.0); }

double NVState::min_population() const { return *std::min_element(n.begin(), n.end()); }

ode::Vec NVState::to_vector() const {
  ode::Vec v;
  for (int i = 0; i < 8; ++i) v[i] = n[i];
  v[8] = rho_re;
  v[9] = rho_im;
  return v;
}

NVState NVState::from_vector(const ode::Vec& v) {
  NVState s;
  for (int i = 0; i < 8; ++i) s.n[i] = v[i];
  s.rho_re = v[8];
  s.rho_im = v[9];
  return s;
}

NVState NVState::thermal() {
  NVState s;
  s.n[0] = s.n[1] = s.n[2] = 1.0 / 3.0;
  return s;
}

NVState NVState::polarized() {
  NVState s;
  s.n[0] = 1.0;
  return s;
}

double KineticsParams::largest_rate() const {
  return std::max({gamma_p, gamma_1, gamma_2_star, r_fl + r_47, r_fl + r_57, r_fl + r_67, r_78,
                   r_81 + r_82 + r_83, std::abs(omega_r), std::abs(delta)});
}

void KineticsParams::validate() const {
  const std::pair<const char*, double> rates[] = {
      {"gamma_p", gamma_p}, {"gamma_1", gamma_1}, {"gamma_2_star", gamma_2_star}, {"r_fl", r_fl},
      {"r_47", r_47},       {"r_57", r_57},       {"r_67", r_67},                 {"r_78", r_78},
      {"r_81", r_81},       {"r_82", r_82},       {"r_83", r_83},                 {"omega_r", omega_r}};
  for (const auto& [name, v] : rates) {
    if (!std::isfinite(v) || v < 0.0)
      throw InvalidArgument(std::string("kinetics parameter ") + name + " must be finite and >= 0");
  }
  if (!std::isfinite(delta)) throw InvalidArgument("kinetics parameter delta must be finite");
}

void system_matrix(const KineticsParams& p, double t, ode::Mat& a) {
  a.setZero();
  const double g1 = p.gamma_1 / 3.0;
  const double om = p.omega_r;
  const double d = p.delta_at(t);

  for (int i = 0; i < 3; ++i) {
    a(i, i) = -p.gamma_p - 2.0 * g1;
    for (int j = 0; j < 3; ++j)
      if (j != i) a(i, j) = g1;
    a(i, i + 3) = p.r_fl;
    a(i + 3, i) = p.gamma_p;
  }
  a(0, 7) = p.r_81;
  a(1, 7) = p.r_82;
  a(2, 7) = p.r_83;
  a(0, 9) = -om;
  a(2, 9) = om;

  a(3, 3) = -(p.r_fl + p.r_47);
  a(4, 4) = -(p.r_fl + p.r_57);
  a(5, 5) = -(p.r_fl + p.r_67);

  a(6, 3) = p.r_47;
  a(6, 4) = p.r_57;
  a(6, 5) = p.r_67;
  a(6, 6) = -p.r_78;

  a(7, 6) = p.r_78;
  a(7, 7) = -(p.r_81 + p.r_82 + p.r_83);

  a(8, 8) = -p.gamma_2_star;
  a(8, 9) = d;
  a(9, 8) = -d;
  a(9, 9) = -p.gamma_2_star;
  a(9, 0) = 0.5 * om;
  a(9, 2) = -0.5 * om;
}

ode::Mat system_matrix(const KineticsParams& p, double t) {
  ode::Mat a;
  system_matrix(p, t, a);
  return a;
}

namespace {

void check_finite(const NVState& s) {
  for (double v : s.n)
    if (!std::isfinite(v)) throw InvalidState("NVState has a non-finite population");
  if (!std::isfinite(s.rho_re) || !std::isfinite(s.rho_im))
    throw InvalidState("NVState has a non-finite coherence");
}

ode::MatrixFn matrix_fn(const KineticsParams& p) {
  if (!p.delta_offset) {
    const ode::Mat fixed = system_matrix(p, 0.0);
    return [fixed](double, ode::Mat& a) { a = fixed; };
  }
  return [&p](double t, ode::Mat& a) { system_matrix(p, t, a); };
}

ode::Options options_for(double tolerance) {
  if (!(tolerance > 0.0)) throw InvalidArgument("integration tolerance must be > 0");
  ode::Options o;
  o.rtol = tolerance;
  o.atol = tolerance * 1e-10;
  o.pair = 8;
  return o;
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = n > 1 ? a + (b - a) * k / (n - 1) : a;
  return v;
}

TimeTrace uniform_trace(const std::vector<double>& values, double step, double start) {
  TimeTrace tr;
  tr.samples = values;
  tr.sample_rate = step > 0.0 ? 1.0 / step : 1.0;
  tr.start_time = start;
  tr.unit = Unit::arbitrary;
  return tr;
}

}  // namespace

NVState derivatives(const NVState& s, const KineticsParams& p, double t) {
  check_finite(s);
  p.validate();
  return NVState::from_vector(system_matrix(p, t) * s.to_vector());
}

Trajectory integrate(const NVState& s0, const KineticsParams& p, const std::vector<double>& sample_times,
                     double tolerance) {
  check_finite(s0);
  p.validate();
  for (std::size_t k = 0; k < sample_times.size(); ++k) {
    if (sample_times[k] < 0.0 || (k > 0 && sample_times[k] <= sample_times[k - 1]))
      throw InvalidArgument("sample times must be >= 0 and strictly increasing");
  }
  Trajectory tr;
  tr.times = sample_times;
  tr.states.reserve(sample_times.size());
  tr.fluorescence.reserve(sample_times.size());
  const double sum0 = s0.population_sum();
  auto record = [&](std::size_t, double, const ode::Vec& y) {
    const NVState s = NVState::from_vector(y);
    tr.states.push_back(s);
    tr.fluorescence.push_back(s.fluorescence());
    tr.max_sum_drift = std::max(tr.max_sum_drift, std::abs(s.population_sum() - sum0));
    tr.min_population = std::min(tr.min_population, s.min_population());
  };
  ode::integrate_linear(matrix_fn(p), 0.0, s0.to_vector(), sample_times, options_for(tolerance), record);
  tr.positivity_violated = tr.min_population < -1e-12;
  return tr;
}

Trajectory integrate(const NVState& s0, const KineticsParams& p, double duration, double tolerance,
                     std::size_t samples) {
  if (!(duration >= 0.0)) throw InvalidArgument("duration must be >= 0");
  if (duration == 0.0) return integrate(s0, p, std::vector<double>{0.0}, tolerance);
  return integrate(s0, p, linspace(0.0, duration, std::max<std::size_t>(samples, 2)), tolerance);
}

NVState propagate(const NVState& s0, const KineticsParams& p, double t0, double duration, double tolerance) {
  if (!(duration >= 0.0)) throw InvalidArgument("duration must be >= 0");
  if (duration == 0.0) return s0;
  const double end = t0 + duration;
  return NVState::from_vector(ode::integrate_linear(matrix_fn(p), t0, s0.to_vector(), std::span(&end, 1),
                                                    options_for(tolerance)));
}

NVState steady_state(const KineticsParams& p) {
  p.validate();
  if (!(p.gamma_p > 0.0 || p.gamma_1 > 0.0))
    throw ConvergenceError("steady_state: needs gamma_p > 0 or gamma_1 > 0 for a unique attractor");
  const ode::Mat a = system_matrix(p, 0.0);
  ode::Mat m = a;
  ode::Vec b = ode::Vec::Zero();
  m.row(0).setZero();
  m.row(0).head<8>().setOnes();
  b[0] = 1.0;
  Eigen::FullPivLU<ode::Mat> lu(m);
  if (!lu.isInvertible()) throw ConvergenceError("steady_state: singular kinetics matrix");
  ode::Vec x = lu.solve(b);
  for (int it = 0; it < 3; ++it) x += lu.solve(b - m * x);

  const double scale = a.cwiseAbs().maxCoeff();
  const double resid = (a * x).cwiseAbs().maxCoeff();
  if (!(resid <= 1e-12 * scale))
    throw ConvergenceError("steady_state: residual " + std::to_string(resid) + " above tolerance");
  return NVState::from_vector(x);
}

TimeTrace simulate_repolarization(const KineticsParams& p, double duration, std::size_t samples) {
  return simulate_repolarization(p, duration, NVState::thermal(), samples);
}

TimeTrace simulate_repolarization(const KineticsParams& p, double duration, const NVState& initial,
                                  std::size_t samples) {
  if (!(duration > 0.0)) throw InvalidArgument("repolarization duration must be > 0");
  KineticsParams q = p;
  q.omega_r = 0.0;
  samples = std::max<std::size_t>(samples, 2);
  const Trajectory tr = integrate(initial, q, duration, default_tolerance, samples);
  return uniform_trace(tr.fluorescence, duration / (samples - 1), 0.0);
}

double rabi_flopping_frequency(const KineticsParams& p) {
  const double c = p.gamma_p / 4.0 - p.gamma_1 / 2.0;
  const double w2 = p.omega_r * p.omega_r - c * c;
  return w2 > 0.0 ? std::sqrt(w2) / two_pi : 0.0;
}

namespace {

// Mean fluorescence over a laser-on, MW-off gate; graded grid resolves the excited-state rise.
double gate_mean(const NVState& s, const KineticsParams& laser_on, double gate, double tol) {
  std::vector<double> t;
  t.push_back(1e-10);
  const int n = 80;
  const double r = std::pow(gate / 1e-10, 1.0 / n);
  for (int k = 1; k <= n; ++k) t.push_back(t.back() * r);
  t.back() = gate;
  std::vector<double> f;
  f.push_back(s.fluorescence());
  ode::MatrixFn a = [m = system_matrix(laser_on, 0.0)](double, ode::Mat& out) { out = m; };
  ode::integrate_linear(a, 0.0, s.to_vector(), t, options_for(tol),
                        [&](std::size_t, double, const ode::Vec& y) { f.push_back(y[3] + y[4] + y[5]); });
  double acc = 0.0, prev_t = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    acc += 0.5 * (f[k] + f[k + 1]) * (t[k] - prev_t);
    prev_t = t[k];
  }
  return acc / gate;
}

}  // namespace

TimeTrace simulate_rabi(const KineticsParams& p, double duration, bool continuous_excitation,
                        std::size_t samples) {
  if (!(duration > 0.0)) throw InvalidArgument("Rabi duration must be > 0");
  KineticsParams off = p;
  off.omega_r = 0.0;
  const NVState init = steady_state(off);
  if (samples == 0) {
    const double periods = p.omega_r * duration / two_pi;
    samples = static_cast<std::size_t>(std::clamp(40.0 * periods, 201.0, 20001.0));
  }
  const std::vector<double> times = linspace(0.0, duration, samples);
  const double step = duration / (samples - 1);
  if (continuous_excitation) {
    const Trajectory tr = integrate(init, p, times, default_tolerance);
    return uniform_trace(tr.fluorescence, step, 0.0);
  }
  KineticsParams dark = p;
  dark.gamma_p = 0.0;
  const Trajectory tr = integrate(init, dark, times, default_tolerance);
  std::vector<double> values;
  values.reserve(samples);
  for (const NVState& s : tr.states) values.push_back(gate_mean(s, off, 10e-6, default_tolerance));
  return uniform_trace(values, step, 0.0);
}

TimeTrace simulate_fid(const KineticsParams& p, double tau_max, const FidOptions& opt) {
  if (!(p.omega_r > 0.0)) throw InvalidArgument("simulate_fid needs omega_r > 0 for the pi/2 pulses");
  if (!(tau_max > 0.0)) throw InvalidArgument("tau_max must be > 0");
  if (opt.hyperfine_detunings.empty()) throw InvalidArgument("simulate_fid needs at least one subensemble");
  if (opt.points < 2) throw InvalidArgument("simulate_fid needs at least 2 points");

  KineticsParams laser_on = p;
  laser_on.omega_r = 0.0;
  laser_on.delta_offset = nullptr;
  const NVState ref_state = steady_state(laser_on);
  const double f_ref = gate_mean(ref_state, laser_on, opt.readout_gate, opt.tolerance);
  const double t_pulse = pi / (2.0 * p.omega_r);
  const std::vector<double> taus = linspace(0.0, tau_max, opt.points);

  std::vector<double> contrast(opt.points, 0.0);
  for (double det : opt.hyperfine_detunings) {
    KineticsParams pulse = p;
    pulse.delta_offset = nullptr;
    pulse.delta = p.delta + hz_to_rad_s(det);
    if (!opt.continuous_excitation) pulse.gamma_p = 0.0;
    KineticsParams free = pulse;
    free.omega_r = 0.0;

    const NVState s1 = propagate(ref_state, pulse, 0.0, t_pulse, opt.tolerance);
    std::vector<NVState> after_free;
    after_free.push_back(s1);
    std::vector<double> tail(taus.begin() + 1, taus.end());
    const Trajectory tr = integrate(s1, free, tail, opt.tolerance);
    after_free.insert(after_free.end(), tr.states.begin(), tr.states.end());

    for (std::size_t k = 0; k < taus.size(); ++k) {
      const NVState s2 = propagate(after_free[k], pulse, 0.0, t_pulse, opt.tolerance);
      const double f = gate_mean(s2, laser_on, opt.readout_gate, opt.tolerance);
      contrast[k] += (1.0 - f / f_ref) / opt.hyperfine_detunings.size();
    }
  }
  return uniform_trace(contrast, tau_max / (opt.points - 1), 0.0);
}

void Trajectory::write_csv(const std::filesystem::path& path, const std::vector<std::string>& header_comments) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (const auto& line : header_comments) out << "# " << line << '\n';
  out << "time_s,n1,n2,n3,n4,n5,n6,n7,n8,rho_re,rho_im,fluorescence\n";
  out << std::setprecision(17);
  for (std::size_t k = 0; k < times.size(); ++k) {
    out << times[k];
    for (double v : states[k].n) out << ',' << v;
    out << ',' << states[k].rho_re << ',' << states[k].rho_im << ',' << fluorescence[k] << '\n';
  }
}

}  // namespace nvmag::kinetics
