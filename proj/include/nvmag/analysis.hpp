#pragma once

#include "nvmag/lockin.hpp"
#include "nvmag/trace.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace nvmag::analysis {

struct Detrended {
  TimeTrace residual;
  double slope = 0.0;      // units per second
  double intercept = 0.0;  // value at t = start_time
};

Detrended detrend_linear(const TimeTrace& trace);

enum class Window { rectangular, hann };

struct NoiseSpectrum {
  std::vector<double> freqs;      // 0 .. Nyquist
  std::vector<double> amplitude;  // single-sided, coherent-tone convention
  double resolution = 0.0;        // sample_rate / N
  double measurement_time = 0.0;  // N / sample_rate
  Unit unit = Unit::arbitrary;

  void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header_comments = {}) const;
};

// With scalar_factor (V/T) a volt trace is converted to tesla.
NoiseSpectrum noise_spectrum(const TimeTrace& trace, std::optional<double> scalar_factor = std::nullopt,
                             Window window = Window::rectangular);

struct FieldFloor {
  double floor = 0.0;  // median bin amplitude in band
  double eta = 0.0;    // floor * sqrt(measurement_time)
  double f_lo = 0.0;
  double f_hi = 0.0;
  std::size_t bins = 0;
};

FieldFloor min_detectable_field(const NoiseSpectrum& spectrum, double f_lo, double f_hi);

// volts -> tesla for a slope in V/T
double volts_to_tesla(double volts, double scalar_factor);

struct ToneRecovery {
  std::vector<double> freqs;
  std::vector<double> amplitudes;  // DFT of the baseband evaluated exactly at each tone
  NoiseSpectrum baseband;
};

// Demodulates at the carrier (in-phase) and reads the baseband tones.
ToneRecovery recover_calibration_tones(const TimeTrace& trace, double carrier, const std::vector<double>& tone_freqs,
                                       lockin::LockinConfig cfg);

// Amplitude of a sinusoid at f (Hz) by single-frequency DFT projection, mean removed.
double tone_amplitude(const TimeTrace& trace, double f);

TimeTrace gradiometer_difference(const TimeTrace& ch1, const TimeTrace& ch2);

double flux_gain_from_slopes(double slope_with_fg, double slope_without_fg);

// Seeded Gaussian source: mt19937_64 feeding the Box-Muller transform (both deviates used).
class GaussianNoise {
 public:
  explicit GaussianNoise(std::uint64_t seed) : rng_(seed) {}
  double operator()();

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

struct CalibrationSynth {
  double sample_rate = 900.0;
  std::size_t samples = 65536;
  double carrier = 182.0;
  std::vector<double> tone_freqs{2.0, 5.0, 10.0};
  double tone_amplitude = 150e-12;  // T
  double noise_sigma = 100e-12;     // T per sample
  double ramp_slope = 0.0;          // T/s, battery-discharge drift
  double ramp_offset = 0.0;         // T
  std::vector<double> interferers;  // Hz, unit-amplitude-scaled by tone_amplitude
};

// sum of tones multiplied by sin(2 pi carrier t), plus noise and ramp; unit tesla
TimeTrace synthetic_calibration_trace(const CalibrationSynth& cfg, std::uint64_t seed);

// Default calibration lock-in: 49 Hz cutoff, order 4, in-phase.
lockin::LockinConfig calibration_lockin(double carrier);

}  // namespace nvmag::analysis
