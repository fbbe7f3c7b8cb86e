#include "nvmag/sensitivity.hpp"

#include "nvmag/error.hpp"
#include "nvmag/odmr.hpp"
#include "nvmag/parallel.hpp"
#include "nvmag/units.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <tuple>

namespace nvmag::sensitivity {

double shot_noise_cw(double p_f, double linewidth, double contrast, double photon_rate, double t) {
  if (!(p_f > 0 && linewidth > 0 && t > 0)) throw InvalidArgument("shot_noise_cw: p_f, linewidth and t must be > 0");
  if (!(contrast > 0) || !(photon_rate > 0))
    throw SingularityError("shot_noise_cw: zero contrast or photon rate gives unbounded delta B");
  return p_f * h_over_g_mub * linewidth / (contrast * std::sqrt(photon_rate * t));
}

double shot_noise_ramsey(double contrast, double photons_per_meas, double tau_m, double t_seq, double t) {
  if (!(tau_m > 0 && t_seq > 0 && t > 0)) throw InvalidArgument("shot_noise_ramsey: times must be > 0");
  if (tau_m > t_seq) throw InvalidArgument("shot_noise_ramsey: tau_m must not exceed t_seq");
  if (!(contrast > 0) || !(photons_per_meas > 0))
    throw SingularityError("shot_noise_ramsey: zero contrast or photon number");
  return hbar_over_g_mub / (contrast * std::sqrt(photons_per_meas * tau_m * t)) * std::sqrt(t_seq / tau_m);
}

double shot_noise_ramsey_rate(double contrast, double photon_rate, double tau_m, double t) {
  if (!(tau_m > 0 && t > 0)) throw InvalidArgument("shot_noise_ramsey_rate: times must be > 0");
  if (!(contrast > 0) || !(photon_rate > 0)) throw SingularityError("shot_noise_ramsey_rate: zero contrast or rate");
  return hbar_over_g_mub / (contrast * tau_m * std::sqrt(photon_rate * t));
}

double photon_rate_from_pd(double u_pd, double transimpedance_gain) {
  if (!(transimpedance_gain > 0)) throw InvalidArgument("photon_rate_from_pd: gain must be > 0");
  return u_pd / (transimpedance_gain * elementary_charge);
}

void ReadoutGeometry::validate() const {
  if (!(t_seq > 0 && delta_t > 0 && tau_fl > 0 && t2_star > 0 && t_ref > 0))
    throw InvalidArgument("ReadoutGeometry: times must be > 0");
  if (delta_t > 0.5 * t_seq * (1 + 1e-12)) throw InvalidArgument("ReadoutGeometry: delta_t must be <= t_seq/2");
  if (!(tau_m >= 0 && tau_m < t_seq)) throw InvalidArgument("ReadoutGeometry: need 0 <= tau_m < t_seq");
}

namespace {

// integral of -A exp(-t/tau) over [a, b]
double recovery_integral(const ReadoutGeometry& g, double a, double b) {
  return -g.a_fl * g.tau_fl * (std::exp(-a / g.tau_fl) - std::exp(-b / g.tau_fl));
}

}  // namespace

double lia_contrast(const ReadoutGeometry& g) {
  g.validate();
  if (g.t0 < 0.5 * g.t_seq) throw InvalidArgument("lia_contrast: t0 must be >= t_seq/2");
  const double half = 0.5 * g.t_seq;
  const double u = (recovery_integral(g, g.t0 - half, g.t0) - recovery_integral(g, g.t0, g.t0 + half)) / half;
  return std::abs(u) * std::exp(-g.tau_m / g.t2_star);
}

double gated_contrast(const ReadoutGeometry& g) {
  g.validate();
  if (g.t0 < 0.5 * g.t_seq) throw InvalidArgument("gated_contrast: t0 must be >= t_seq/2");
  const double half = 0.5 * g.t_seq;
  const double u = (recovery_integral(g, g.t0 - half, g.t0 - half + g.delta_t) -
                    recovery_integral(g, g.t0, g.t0 + g.delta_t)) /
                   g.delta_t;
  return std::abs(u) * std::exp(-g.tau_m / g.t2_star);
}

double equivalent_contrast(double c_det, const ReadoutGeometry& g) {
  if (!(g.t_ref > 0)) throw InvalidArgument("equivalent_contrast: t_ref must be > 0");
  if (!(g.t_seq > 0 && g.delta_t > 0)) throw InvalidArgument("equivalent_contrast: t_seq and delta_t must be > 0");
  return c_det / std::sqrt(g.t_seq / g.delta_t) / std::sqrt(g.t_seq / g.t_ref);
}

double coil_noise(const CoilNoiseInputs& in) {
  if (!(in.r_coil > 0 && in.r_battery > 0)) throw InvalidArgument("coil_noise: resistances must be > 0");
  if (!(in.u_supply > 0)) throw InvalidArgument("coil_noise: supply voltage must be > 0");
  if (in.temperature < 0 || in.current < 0 || in.bandwidth < 0) throw InvalidArgument("coil_noise: negative input");
  const double u_j = std::sqrt(4.0 * boltzmann * in.temperature * (in.r_coil + in.r_battery) * in.bandwidth);
  const double i_shot = std::sqrt(2.0 * elementary_charge * in.current * in.bandwidth);
  return std::sqrt(2.0) * in.b_bias / (2.0 * in.u_supply) * std::hypot(u_j, i_shot * in.r_coil);
}

double volume_normalized(double eta, double volume_mm3) {
  if (!(volume_mm3 > 0)) throw InvalidArgument("volume_normalized: volume must be > 0");
  return eta * std::sqrt(volume_mm3);
}

SensitivityReport make_report(double eta, double contrast, double linewidth, double photon_rate, double t,
                              double volume_mm3, double scalar_factor) {
  if (!(t > 0)) throw InvalidArgument("make_report: measurement time must be > 0");
  SensitivityReport r;
  r.eta = eta;
  r.delta_b = eta / std::sqrt(t);
  r.contrast = contrast;
  r.linewidth = linewidth;
  r.photon_rate = photon_rate;
  r.scalar_factor = scalar_factor;
  r.measurement_time = t;
  r.eta_v = volume_normalized(eta, volume_mm3);
  return r;
}

namespace {

kinetics::KineticsParams model_params(double t1, double t2_star, double s, const CwModel& m) {
  if (!(t1 > 0 && t2_star > 0)) throw InvalidArgument("optimize_cw: t1 and t2_star must be > 0");
  if (!(s > 0)) throw InvalidArgument("optimize_cw: saturation fraction must be > 0");
  kinetics::KineticsParams p = m.base;
  p.delta_offset = nullptr;
  p.delta = 0.0;
  p.omega_r = 0.0;
  p.gamma_1 = 1.0 / t1;
  p.gamma_2_star = 1.0 / t2_star;
  p.gamma_p = s * m.gamma_p_sat;
  return p;
}

double dark_level(double t1, double t2_star, double s, const CwModel& m) {
  return kinetics::steady_state(model_params(t1, t2_star, s, m)).fluorescence();
}

CwPoint evaluate_with_ref(double t1, double t2_star, double s, double omega_r, const CwModel& m, double f_ref) {
  kinetics::KineticsParams p = model_params(t1, t2_star, s, m);
  const double f_off = kinetics::steady_state(p).fluorescence();
  p.omega_r = omega_r;
  const double f_on = kinetics::steady_state(p).fluorescence();
  CwPoint c;
  c.s = s;
  c.omega_r = omega_r;
  c.gamma_p = p.gamma_p;
  c.contrast = m.addressed_fraction * (f_off - f_on) / f_off;
  c.linewidth = odmr::cw_linewidth(p.gamma_1, p.gamma_2_star, p.gamma_p, omega_r);
  c.photon_rate = m.photon_rate_ref * f_off / f_ref;
  c.delta_b = c.contrast > 0 ? shot_noise_cw(m.p_f, c.linewidth, c.contrast, c.photon_rate, m.measurement_time)
                             : std::numeric_limits<double>::infinity();
  return c;
}

}  // namespace

CwPoint evaluate_cw(double t1, double t2_star, double s, double omega_r, const CwModel& model) {
  return evaluate_with_ref(t1, t2_star, s, omega_r, model, dark_level(t1, t2_star, model.s_ref, model));
}

OptimizationResult optimize_cw(double t1, double t2_star, const std::vector<double>& s_grid,
                               const std::vector<double>& omega_grid, const CwModel& model) {
  if (s_grid.empty() || omega_grid.empty()) throw InvalidArgument("optimize_cw: grids must be nonempty");
  const double f_ref = dark_level(t1, t2_star, model.s_ref, model);
  OptimizationResult r;
  r.n_s = s_grid.size();
  r.n_omega = omega_grid.size();
  r.map.resize(r.n_s * r.n_omega);
  parallel_for(r.map.size(), [&](std::size_t i) {
    r.map[i] = evaluate_with_ref(t1, t2_star, s_grid[i / r.n_omega], omega_grid[i % r.n_omega], model, f_ref);
  });
  r.best = r.map.front();
  for (const CwPoint& c : r.map) {
    if (std::tie(c.delta_b, c.omega_r, c.s) < std::tie(r.best.delta_b, r.best.omega_r, r.best.s)) r.best = c;
  }
  return r;
}

void OptimizationResult::write_csv(const std::filesystem::path& path,
                                   const std::vector<std::string>& header_comments) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (const auto& line : header_comments) out << "# " << line << '\n';
  out << "s,omega_r_hz,delta_b_tesla\n" << std::setprecision(17);
  for (const CwPoint& c : map) out << c.s << ',' << rad_s_to_hz(c.omega_r) << ',' << c.delta_b << '\n';
}

}  // namespace nvmag::sensitivity
