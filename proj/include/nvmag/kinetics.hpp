#pragma once

#include "nvmag/ode.hpp"
#include "nvmag/trace.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace nvmag::kinetics {

// n[0..2]: |0>, |-1>, |+1> ground; n[3..5]: excited; n[6]: ISC intermediate; n[7]: singlet.
struct NVState {
  std::array<double, 8> n{};
  double rho_re = 0.0;
  double rho_im = 0.0;

  double population_sum() const;
  double fluorescence() const { return n[3] + n[4] + n[5]; }
  double min_population() const;

  ode::Vec to_vector() const;
  static NVState from_vector(const ode::Vec& v);

  static NVState thermal();    // n1 = n2 = n3 = 1/3
  static NVState polarized();  // n1 = 1
};

struct KineticsParams {
  double gamma_p = 0.026e6;
  double gamma_1 = 1.0 / 6e-3;
  double gamma_2_star = 1.0 / 8.5e-6;
  double r_fl = 66e6;
  double r_47 = 7.9e6;
  double r_57 = 53e6;
  double r_67 = 53e6;
  double r_78 = 1000e6;
  double r_81 = 1e6;
  double r_82 = 0.7e6;
  double r_83 = 0.7e6;
  double omega_r = 0.0;  // rad/s
  double delta = 0.0;    // rad/s
  // Added to delta when set; rad/s as a function of t in s.
  std::function<double(double)> delta_offset;

  double delta_at(double t) const { return delta_offset ? delta + delta_offset(t) : delta; }
  double largest_rate() const;
  void validate() const;
};

// Constant part and the t-dependent detuning entries are assembled here.
void system_matrix(const KineticsParams& p, double t, ode::Mat& a);
ode::Mat system_matrix(const KineticsParams& p, double t);

NVState derivatives(const NVState& s, const KineticsParams& p, double t);

struct Trajectory {
  std::vector<double> times;
  std::vector<NVState> states;
  std::vector<double> fluorescence;
  double max_sum_drift = 0.0;   // max |sum n - 1| relative to the initial sum
  double min_population = 0.0;  // most negative population seen
  bool positivity_violated = false;

  void write_csv(const std::filesystem::path& path,
                 const std::vector<std::string>& header_comments = {}) const;
};

inline constexpr double default_tolerance = 1e-9;

// Samples at `sample_times` (relative to t0 = 0, nondecreasing).
Trajectory integrate(const NVState& s0, const KineticsParams& p, const std::vector<double>& sample_times,
                     double tolerance = default_tolerance);
// Uniform samples including both ends.
Trajectory integrate(const NVState& s0, const KineticsParams& p, double duration, double tolerance = default_tolerance,
                     std::size_t samples = 101);
// Final state only; t runs from t0 to t0 + duration.
NVState propagate(const NVState& s0, const KineticsParams& p, double t0, double duration,
                  double tolerance = default_tolerance);

NVState steady_state(const KineticsParams& p);

TimeTrace simulate_repolarization(const KineticsParams& p, double duration, std::size_t samples = 501);
TimeTrace simulate_repolarization(const KineticsParams& p, double duration, const NVState& initial,
                                  std::size_t samples = 501);

// Continuous: laser on while driving, fluorescence sampled in time.
// Gated: pulse-length sweep with laser off, each point read out by a laser gate; trace indexed by pulse length.
TimeTrace simulate_rabi(const KineticsParams& p, double duration, bool continuous_excitation,
                        std::size_t samples = 0);

struct FidOptions {
  std::vector<double> hyperfine_detunings{0.0, 2.2e6, -2.2e6};  // Hz
  bool continuous_excitation = true;
  std::size_t points = 201;
  double readout_gate = 10e-6;  // s
  double tolerance = 1e-9;
};

// Contrast vs free-evolution time tau in [0, tau_max]; sample_rate = 1/step.
TimeTrace simulate_fid(const KineticsParams& p, double tau_max, const FidOptions& opt = {});

// Flopping frequency in Hz from Eq. S14 form sqrt(omega^2 - (gp/4 - g1/2)^2) / 2pi.
double rabi_flopping_frequency(const KineticsParams& p);

}  // namespace nvmag::kinetics
