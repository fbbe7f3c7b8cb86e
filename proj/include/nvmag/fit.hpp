#pragma once

#include <span>

namespace nvmag::fit {

// y = offset + amplitude * exp(-(t - t[0]) / tau)
struct Exponential {
  double offset = 0.0;
  double amplitude = 0.0;
  double tau = 0.0;
  double rms = 0.0;
};
Exponential exponential(std::span<const double> t, std::span<const double> y);

// y = a + d exp(-kappa t') + exp(-gamma t') (b cos(w t') + c sin(w t')),  t' = t - t[0]
struct DampedSinusoid {
  double frequency = 0.0;  // Hz (w / 2pi)
  double decay = 0.0;      // gamma, 1/s
  double amplitude = 0.0;  // sqrt(b^2 + c^2)
  double phase = 0.0;      // atan2(-c, b)
  double offset = 0.0;
  double baseline_amplitude = 0.0;
  double baseline_rate = 0.0;
  double rms = 0.0;
  double frequency_sigma = 0.0;  // from the Jacobian at the optimum
};
// f_guess <= 0 picks the dominant periodogram peak.
DampedSinusoid damped_sinusoid(std::span<const double> t, std::span<const double> y, double f_guess = 0.0);

// y = baseline - depth / (1 + ((x - center)/hwhm)^2)
struct Lorentzian {
  double center = 0.0;
  double hwhm = 0.0;
  double depth = 0.0;
  double baseline = 0.0;
  double rms = 0.0;
  double fwhm() const { return 2.0 * hwhm; }
};
Lorentzian lorentzian_dip(std::span<const double> x, std::span<const double> y);

// Periodogram peak of a uniformly sampled record (mean removed, parabolic bin interpolation).
double dominant_frequency(std::span<const double> y, double sample_rate);

}  // namespace nvmag::fit
