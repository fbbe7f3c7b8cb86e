#pragma once

#include <numbers>

namespace nvmag {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

// SI exact values
inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double boltzmann = 1.380649e-23;             // J/K

// NV gyromagnetic ratio, Hz/T
inline constexpr double gamma_nv = 28.024e9;
// h/(g muB) in T/Hz and hbar/(g muB) in T*s
inline constexpr double h_over_g_mub = 1.0 / gamma_nv;
inline constexpr double hbar_over_g_mub = 1.0 / (two_pi * gamma_nv);

constexpr double hz_to_rad_s(double f) { return two_pi * f; }
constexpr double rad_s_to_hz(double w) { return w / two_pi; }

}  // namespace nvmag
