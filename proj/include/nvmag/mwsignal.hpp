#pragma once

#include <vector>

namespace nvmag::mw {

enum class Kind { fm, pm, am };

struct MWModulation {
  Kind kind = Kind::fm;
  double f0 = 0.0;     // carrier, Hz
  double f_m = 0.0;    // modulation frequency, Hz
  double f_d = 0.0;    // FM deviation, Hz
  double phi_d = 0.0;  // PM deviation, rad

  static MWModulation fm(double f0, double f_m, double f_d);
  static MWModulation pm(double f0, double f_m, double phi_d);
  static MWModulation am(double f0, double f_m);

  double beta() const;            // f_d/f_m (FM) or phi_d (PM)
  double peak_deviation() const;  // Hz
  void validate() const;
};

// Hz; cosine phase, maximal at t = 0.
double instantaneous_detuning(const MWModulation& mod, double t);
double carson_bandwidth(const MWModulation& mod);

// J_n(beta), n = 0..n_max
std::vector<double> bessel_sidebands(double beta, int n_max);
// J_n for signed n, J_{-n} = (-1)^n J_n
double sideband(double beta, int n);
// Fraction of carrier power in orders |n| <= n_max.
double sideband_power_fraction(double beta, int n_max);
// Fraction of FM/PM power falling inside the Carson band.
double carson_power_fraction(const MWModulation& mod);

struct Tone {
  double frequency;  // Hz
  double amplitude;  // relative field amplitude
};

struct TwoTone {
  std::vector<Tone> tones;
  bool degenerate = false;  // f_m == 0 collapses to one tone
  bool splitting = false;   // sideband pair resolvable against the ODMR line
};

// Sum of two Lorentzians of half-width w at +-f_m shows a central dip when f_m > w/sqrt(3).
TwoTone am_two_tone(double f0, double f_m, double odmr_hwhm = 19e3);

}  // namespace nvmag::mw
