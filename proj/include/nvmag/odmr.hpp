#pragma once

#include "nvmag/kinetics.hpp"
#include "nvmag/lockin.hpp"
#include "nvmag/mwsignal.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace nvmag::odmr {

struct OdmrSpectrum {
  std::vector<double> freqs;   // detuning from resonance, Hz
  std::vector<double> signal;  // fluorescence or demodulated level (model units)
  double fwhm_hz = 0.0;        // fitted Lorentzian, 0 when not fitted
  double center_hz = 0.0;
  double contrast = 0.0;       // fraction of the MW-off level
  double reference = 0.0;      // MW-off fluorescence
  bool fitted = false;
  double lockin_phase = 0.0;   // rad, detection phase chosen for demodulated spectra

  double hwhm_hz() const { return 0.5 * fwhm_hz; }
  void validate() const;
  void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header_comments = {}) const;
};

// Half width in Hz; gamma_c = gamma_p.
double cw_linewidth(double gamma_1, double gamma_2_star, double gamma_p, double omega_r);
double pulsed_odmr_linewidth(double t2_star);

std::vector<double> linear_grid(double lo, double hi, std::size_t n);
// Symmetric grid covering +-span_factor formula half-widths.
std::vector<double> default_grid(const kinetics::KineticsParams& p, std::size_t n = 161, double span_factor = 8.0);

OdmrSpectrum cw_spectrum(const kinetics::KineticsParams& p, const std::vector<double>& freq_grid);

struct LockinOdmrOptions {
  int samples_per_period = 40;
  int average_periods = 8;
  double cutoff_fraction = 0.1;  // lock-in cutoff / f_m
  int filter_order = 2;
  double kinetic_settle = 0.5e-3;
  double tolerance = 1e-8;
};

// Signal = -2 X' where X' is the lock-in output against the cosine-phase detuning reference, rotated by the
// single detection phase that maximizes the signal over the sweep (principal axis of the X/Y points). For slow
// modulation the phase is ~0 and the small-modulation limit equals S(f - f_d) - S(f + f_d).
OdmrSpectrum lockin_odmr_spectrum(const kinetics::KineticsParams& p, const mw::MWModulation& mod,
                                  const std::vector<double>& freq_grid, const LockinOdmrOptions& opt = {});

// Single grid point of the above; returns (X, Y) of the lock-in.
std::pair<double, double> lockin_point(const kinetics::KineticsParams& p, const mw::MWModulation& mod,
                                       double carrier_hz, const LockinOdmrOptions& opt = {});

// S(f - f_d) - S(f + f_d) from steady states.
OdmrSpectrum static_difference(const kinetics::KineticsParams& p, double f_d, const std::vector<double>& freq_grid);

struct ScalarFactor {
  double per_tesla = 0.0;  // max |dS/df| * gamma_nv
  double slope_per_hz = 0.0;
  double location_hz = 0.0;
  bool flat = false;
  std::string warning;
};
ScalarFactor scalar_factor(const OdmrSpectrum& s);

struct FrequencyResponseOptions {
  double deviation_fraction = 0.05;  // f_d relative to the half width
  LockinOdmrOptions lockin{};
};

struct FrequencyResponse {
  std::vector<double> f_m;
  std::vector<double> magnitude;   // |X + iY| / f_d, fluorescence per Hz
  std::vector<double> normalized;  // relative to the static slope
  double static_slope = 0.0;       // |dS/df| at the operating point
  double operating_detuning_hz = 0.0;
  double deviation_hz = 0.0;
  double bandwidth_3db = 0.0;      // Hz; NaN when the curve never drops below 1/sqrt(2)
  double contrast_at(double f) const;  // normalized response, log-interpolated
};

FrequencyResponse frequency_response(const kinetics::KineticsParams& p, const std::vector<double>& f_m_list,
                                     const FrequencyResponseOptions& opt = {});

}  // namespace nvmag::odmr
