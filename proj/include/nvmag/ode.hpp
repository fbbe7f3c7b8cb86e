#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <limits>
#include <span>

namespace nvmag::ode {

inline constexpr int dim = 10;
using Vec = Eigen::Matrix<double, dim, 1>;
using Mat = Eigen::Matrix<double, dim, dim>;

// Fills A for dy/dt = A(t) y.
using MatrixFn = std::function<void(double t, Mat& a)>;
using Observer = std::function<void(std::size_t index, double t, const Vec& y)>;

struct Options {
  double rtol = 1e-9;
  double atol = 1e-14;
  int pair = -1;  // first index of a two-component rotating pair weighted by its joint magnitude
  double h_init = 0.0;  // 0: pick from the largest diagonal rate
  double h_max = std::numeric_limits<double>::infinity();
  std::size_t max_steps = 20'000'000;
};

struct Stats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  double last_h = 0.0;
};

// Three-stage Radau IIA (order 5) for linear systems, step-doubling error control.
// Visits every entry of `times` (nondecreasing, all >= t0) and returns the state at the last one.
Vec integrate_linear(const MatrixFn& a, double t0, const Vec& y0, std::span<const double> times,
                     const Options& opt, const Observer& out = {}, Stats* stats = nullptr);

// Single Radau IIA step, exposed for tests.
Vec radau_step(const MatrixFn& a, double t, double h, const Vec& y);

}  // namespace nvmag::ode
