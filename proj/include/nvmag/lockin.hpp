#pragma once

#include "nvmag/kinetics.hpp"
#include "nvmag/trace.hpp"

#include <vector>

namespace nvmag::lockin {

enum class Output { in_phase, quadrature, magnitude };

struct LockinConfig {
  double f_ref = 1.0;   // Hz
  double phase = 0.0;   // rad; in-phase reference is sin(2 pi f_ref t + phase)
  double cutoff = 0.1;  // Hz, -3 dB point of each single-pole section
  int filter_order = 2;
  Output output = Output::in_phase;

  void validate() const;
  double time_constant() const;  // 1 / (2 pi cutoff)
  double settling_time() const;  // 10 time constants
};

struct Demodulated {
  TimeTrace x;  // in-phase
  TimeTrace y;  // quadrature
};

// Mix with 2 sin / 2 cos references, then cascaded single-pole low-pass filters.
// Needs sample_rate > 4 f_ref so the 2 f_ref mixing product stays below Nyquist.
Demodulated demodulate_xy(const TimeTrace& trace, const LockinConfig& cfg);
TimeTrace demodulate(const TimeTrace& trace, const LockinConfig& cfg);

// Mean over the last `periods` whole reference periods of a demodulated output.
double tail_mean(const TimeTrace& out, double f_ref, int periods);

struct Segment {
  double duration;    // s
  double rotation;    // pulse angle in rad, 0 for free evolution
  bool readout_start; // readout window opens at the start of this segment
};

struct CERamseySchedule {
  double t_seq = 0.0;
  double tau_m = 0.0;
  double tau_r = 0.0;
  double omega_r = 0.0;   // rad/s
  double t_pi2 = 0.0;     // pi/2 pulse width
  double t_3pi2 = 0.0;    // closing 3pi/2 pulse width of the second half

  double demod_frequency() const { return 1.0 / t_seq; }
  // [pi/2, tau_m, pi/2, tau_r, pi/2, tau_m, 3pi/2, tau_r]; pulse total 3 pi / omega_r
  std::vector<Segment> segments() const;
  double readout_offset() const;  // time of the first readout window within a cycle
};

CERamseySchedule ce_ramsey_schedule(double omega_r, double tau_m, double t_seq);

// Reference aligned to the readout window, f_ref = 1/T_seq, cutoff f_ref/10, order 2.
LockinConfig ce_ramsey_lockin(const CERamseySchedule& s);

struct CERamseyOptions {
  int samples_per_cycle = 64;
  int average_cycles = 8;
  double kinetic_settle = 1e-3;  // s, on top of the filter settling
  double tolerance = 1e-8;
};

struct CERamseyOutput {
  double in_phase = 0.0;
  double quadrature = 0.0;
  int cycles = 0;
};

// Laser on throughout; MW on during pulses; params.delta is replaced by 2 pi * detuning.
CERamseyOutput simulate_ce_ramsey_output(const kinetics::KineticsParams& params, const CERamseySchedule& schedule,
                                         double detuning_hz, const LockinConfig& cfg,
                                         const CERamseyOptions& opt = {});

// Fringe slope at a quarter period 1/(4 tau_m), converted to per-tesla by gamma_nv.
double ce_ramsey_scalar_factor(const kinetics::KineticsParams& params, const CERamseySchedule& schedule,
                               const LockinConfig& cfg, const CERamseyOptions& opt = {});

}  // namespace nvmag::lockin
