#include "nvmag/mwsignal.hpp"

#include "nvmag/error.hpp"
#include "nvmag/units.hpp"

#include <cmath>

namespace nvmag::mw {

MWModulation MWModulation::fm(double f0, double f_m, double f_d) {
  MWModulation m{Kind::fm, f0, f_m, f_d, f_m > 0 ? f_d / f_m : 0.0};
  m.validate();
  return m;
}

MWModulation MWModulation::pm(double f0, double f_m, double phi_d) {
  MWModulation m{Kind::pm, f0, f_m, phi_d * f_m, phi_d};
  m.validate();
  return m;
}

MWModulation MWModulation::am(double f0, double f_m) {
  MWModulation m{Kind::am, f0, f_m, 0.0, 0.0};
  m.validate();
  return m;
}

double MWModulation::beta() const {
  switch (kind) {
    case Kind::fm: return f_d / f_m;
    case Kind::pm: return phi_d;
    case Kind::am: break;
  }
  throw Unsupported("modulation index is undefined for AM");
}

double MWModulation::peak_deviation() const {
  switch (kind) {
    case Kind::fm: return f_d;
    case Kind::pm: return phi_d * f_m;
    case Kind::am: break;
  }
  throw Unsupported("AM has a fixed carrier frequency");
}

void MWModulation::validate() const {
  if (!(f_m > 0.0)) throw InvalidArgument("modulation frequency f_m must be > 0");
  if (!(f_d >= 0.0)) throw InvalidArgument("frequency deviation f_d must be >= 0");
  if (!(phi_d >= 0.0)) throw InvalidArgument("phase deviation phi_d must be >= 0");
  if (kind != Kind::am && std::abs(f_d / f_m - phi_d) > 1e-12 * std::max(1.0, phi_d))
    throw InvalidArgument("inconsistent modulation index: f_d/f_m != phi_d");
}

double instantaneous_detuning(const MWModulation& mod, double t) {
  return mod.peak_deviation() * std::cos(two_pi * mod.f_m * t);
}

double carson_bandwidth(const MWModulation& mod) {
  switch (mod.kind) {
    case Kind::fm: return 2.0 * (mod.f_d + mod.f_m);
    case Kind::pm: return 2.0 * (mod.phi_d + 1.0) * mod.f_m;
    case Kind::am: break;
  }
  throw Unsupported("Carson bandwidth applies to FM/PM only");
}

std::vector<double> bessel_sidebands(double beta, int n_max) {
  if (n_max < 0) throw InvalidArgument("n_max must be >= 0");
  std::vector<double> j(n_max + 1);
  for (int n = 0; n <= n_max; ++n) j[n] = std::cyl_bessel_j(static_cast<double>(n), std::abs(beta));
  if (beta < 0)
    for (int n = 1; n <= n_max; n += 2) j[n] = -j[n];
  return j;
}

double sideband(double beta, int n) {
  const int an = std::abs(n);
  double j = std::cyl_bessel_j(static_cast<double>(an), std::abs(beta));
  if (beta < 0 && an % 2) j = -j;
  return (n < 0 && an % 2) ? -j : j;
}

double sideband_power_fraction(double beta, int n_max) {
  double s = 0.0;
  for (int n = -n_max; n <= n_max; ++n) {
    const double j = sideband(beta, n);
    s += j * j;
  }
  return s;
}

double carson_power_fraction(const MWModulation& mod) {
  const double half = 0.5 * carson_bandwidth(mod);
  const int n_max = static_cast<int>(std::floor(half / mod.f_m + 1e-12));
  return sideband_power_fraction(mod.beta(), n_max);
}

TwoTone am_two_tone(double f0, double f_m, double odmr_hwhm) {
  if (f_m < 0.0) throw InvalidArgument("f_m must be >= 0");
  TwoTone r;
  if (f_m <= 1e-12 * std::max(1.0, std::abs(f0))) {
    r.degenerate = true;
    r.tones = {{f0, 1.0}};
    return r;
  }
  r.tones = {{f0 - f_m, 0.5}, {f0 + f_m, 0.5}};
  r.splitting = f_m > odmr_hwhm / std::sqrt(3.0);
  return r;
}

}  // namespace nvmag::mw
