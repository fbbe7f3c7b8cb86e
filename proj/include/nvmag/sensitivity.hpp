#pragma once

#include "nvmag/kinetics.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace nvmag::sensitivity {

inline constexpr double lorentzian_p_f = 0.77;
inline constexpr double hyperfine_factor = 2.67;
inline constexpr double dr_factor = 1.3;

// CW shot-noise limit: P_F (h/g muB) nu / (C sqrt(R t)); nu is the half width in Hz.
double shot_noise_cw(double p_f, double linewidth, double contrast, double photon_rate, double t);
// Ramsey: (hbar/g muB) / (C sqrt(N tau_m t)) * sqrt(T_seq / tau_m)
double shot_noise_ramsey(double contrast, double photons_per_meas, double tau_m, double t_seq, double t);
// Simplified Ramsey with N = R T_seq: (hbar/g muB) / (C tau_m sqrt(R t))
double shot_noise_ramsey_rate(double contrast, double photon_rate, double tau_m, double t);

double photon_rate_from_pd(double u_pd, double transimpedance_gain);

struct ReadoutGeometry {
  double t_seq = 110e-6;
  double tau_m = 6.42e-6;
  double delta_t = 55e-6;  // gate length
  double t_ref = 110e-6;
  double t0 = 150e-6;
  double a_fl = 105e-3;    // V
  double tau_fl = 0.1e-3;  // s
  double t2_star = 8.5e-6;

  void validate() const;
};

// Magnitudes in volts of the fluorescence change seen by each readout.
double lia_contrast(const ReadoutGeometry& g);
double gated_contrast(const ReadoutGeometry& g);
double equivalent_contrast(double c_det, const ReadoutGeometry& g);

struct CoilNoiseInputs {
  double r_coil = 49.5;
  double r_battery = 16e-3;
  double temperature = 293.15;
  double current = 12.0 / 49.5;
  double b_bias = 1e-3;
  double u_supply = 12.0;
  double bandwidth = 1.0;
};
double coil_noise(const CoilNoiseInputs& in);

double volume_normalized(double eta, double volume_mm3);

struct SensitivityReport {
  double delta_b = 0.0;           // T at measurement_time
  double eta = 0.0;               // T/sqrt(Hz)
  double contrast = 0.0;
  double linewidth = 0.0;         // Hz (half width)
  double photon_rate = 0.0;       // Hz
  double scalar_factor = 0.0;     // V/T, 0 when not applicable
  double hyperfine = hyperfine_factor;
  double dr = dr_factor;
  double measurement_time = 1.0;  // s
  double eta_v = 0.0;             // T mm^1.5 / sqrt(Hz)
  double enhanced_eta() const { return eta / (hyperfine * dr); }
};

SensitivityReport make_report(double eta, double contrast, double linewidth, double photon_rate, double t,
                              double volume_mm3, double scalar_factor = 0.0);

// Steady-state contrast model used by the optimizer.
struct CwModel {
  double gamma_p_sat = 7.4e8;   // Hz; gamma_p = s * gamma_p_sat (fitted, see README)
  double photon_rate_ref = 4.6e15;
  double s_ref = 3e-4;
  double addressed_fraction = 1.0 / 12.0;
  double p_f = lorentzian_p_f;
  double measurement_time = 1.0;
  kinetics::KineticsParams base{};
};

struct CwPoint {
  double s = 0.0;
  double omega_r = 0.0;  // rad/s
  double gamma_p = 0.0;
  double contrast = 0.0;
  double linewidth = 0.0;
  double photon_rate = 0.0;
  double delta_b = 0.0;
};

struct OptimizationResult {
  CwPoint best;
  std::vector<CwPoint> map;  // row-major, s outer
  std::size_t n_s = 0;
  std::size_t n_omega = 0;

  void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header_comments = {}) const;
};

CwPoint evaluate_cw(double t1, double t2_star, double s, double omega_r, const CwModel& model = {});

// Exhaustive grid; ties go to the lowest omega_r, then the lowest s.
OptimizationResult optimize_cw(double t1, double t2_star, const std::vector<double>& s_grid,
                               const std::vector<double>& omega_grid, const CwModel& model = {});

}  // namespace nvmag::sensitivity
