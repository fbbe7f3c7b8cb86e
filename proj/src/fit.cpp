#include "nvmag/fit.hpp"

#include "fft.hpp"
#include "nvmag/error.hpp"
#include "nvmag/units.hpp"

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace nvmag::fit {

namespace {

using Residual = std::function<void(const Eigen::VectorXd& p, Eigen::VectorXd& r)>;

struct LmFunctor {
  using Scalar = double;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;

  Residual f;
  int n_in;
  int n_out;
  int inputs() const { return n_in; }
  int values() const { return n_out; }
  int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& r) const {
    f(p, r);
    return 0;
  }
};

struct LmResult {
  Eigen::VectorXd p;
  double rms;
  Eigen::VectorXd sigma;
};

LmResult least_squares(const Residual& f, Eigen::VectorXd p, int n_out) {
  LmFunctor fn{f, static_cast<int>(p.size()), n_out};
  Eigen::NumericalDiff<LmFunctor, Eigen::Central> nd(fn);
  Eigen::LevenbergMarquardt<Eigen::NumericalDiff<LmFunctor, Eigen::Central>, double> lm(nd);
  lm.parameters.maxfev = 4000;
  lm.parameters.xtol = 1e-14;
  lm.parameters.ftol = 1e-14;
  lm.minimize(p);

  Eigen::VectorXd r(n_out);
  f(p, r);
  LmResult out{p, std::sqrt(r.squaredNorm() / n_out), Eigen::VectorXd::Zero(p.size())};
  Eigen::MatrixXd jac(n_out, p.size());
  nd.df(p, jac);
  const int dof = std::max(1, n_out - static_cast<int>(p.size()));
  const double s2 = r.squaredNorm() / dof;
  Eigen::MatrixXd jtj = jac.transpose() * jac;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(jtj);
  if (lu.isInvertible()) {
    Eigen::MatrixXd cov = lu.inverse() * s2;
    out.sigma = cov.diagonal().cwiseAbs().cwiseSqrt();
  }
  return out;
}

void require_same_size(std::span<const double> a, std::span<const double> b, std::size_t min_n) {
  if (a.size() != b.size()) throw InvalidArgument("fit: x and y lengths differ");
  if (a.size() < min_n) throw InvalidArgument("fit: not enough points");
}

}  // namespace

Exponential exponential(std::span<const double> t, std::span<const double> y) {
  require_same_size(t, y, 3);
  const std::size_t n = t.size();
  const double t0 = t.front();
  const double span = t.back() - t0;
  if (!(span > 0.0)) throw InvalidArgument("fit::exponential: zero time span");

  // Linear offset/amplitude for fixed tau; returns residual sum of squares.
  auto solve = [&](double tau, Exponential* res) {
    double s1 = 0, se = 0, see = 0, sy = 0, sey = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double e = std::exp(-(t[k] - t0) / tau);
      s1 += 1.0;
      se += e;
      see += e * e;
      sy += y[k];
      sey += e * y[k];
    }
    const double det = s1 * see - se * se;
    double a = sy / s1, b = 0.0;
    if (std::abs(det) > 1e-300) {
      a = (see * sy - se * sey) / det;
      b = (s1 * sey - se * sy) / det;
    }
    double ss = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double r = y[k] - a - b * std::exp(-(t[k] - t0) / tau);
      ss += r * r;
    }
    if (res) *res = Exponential{a, b, tau, std::sqrt(ss / n)};
    return ss;
  };

  // coarse log scan, then Brent on log tau
  const double lo = std::log(span * 1e-4), hi = std::log(span * 1e2);
  double best = lo, best_ss = INFINITY;
  const int scan = 200;
  for (int i = 0; i <= scan; ++i) {
    const double lt = lo + (hi - lo) * i / scan;
    const double ss = solve(std::exp(lt), nullptr);
    if (ss < best_ss) {
      best_ss = ss;
      best = lt;
    }
  }
  const double step = (hi - lo) / scan;
  auto [lt, ss] = boost::math::tools::brent_find_minima(
      [&](double v) { return solve(std::exp(v), nullptr); }, best - step, best + step, 52);
  (void)ss;
  Exponential res;
  solve(std::exp(lt), &res);
  return res;
}

double dominant_frequency(std::span<const double> y, double sample_rate) {
  if (y.size() < 4) throw InvalidArgument("dominant_frequency: need at least 4 samples");
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
  std::vector<double> x(y.begin(), y.end());
  for (double& v : x) v -= mean;
  std::size_t n_fft = 1;
  while (n_fft < 8 * x.size()) n_fft <<= 1;
  const auto spec = detail::rfft(x, n_fft);
  std::size_t kmax = 1;
  for (std::size_t k = 1; k < spec.size(); ++k)
    if (std::abs(spec[k]) > std::abs(spec[kmax])) kmax = k;
  double shift = 0.0;
  if (kmax > 0 && kmax + 1 < spec.size()) {
    const double a = std::abs(spec[kmax - 1]), b = std::abs(spec[kmax]), c = std::abs(spec[kmax + 1]);
    const double den = a - 2 * b + c;
    if (den != 0.0) shift = 0.5 * (a - c) / den;
  }
  return (kmax + shift) * sample_rate / n_fft;
}

DampedSinusoid damped_sinusoid(std::span<const double> t, std::span<const double> y, double f_guess) {
  require_same_size(t, y, 8);
  const int n = static_cast<int>(t.size());
  const double t0 = t.front();
  const double span = t.back() - t0;
  if (f_guess <= 0.0) f_guess = dominant_frequency(y, (n - 1) / span);

  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double amp = 0.0;
  for (double v : y) amp = std::max(amp, std::abs(v - mean));

  // initial linear coefficients for fixed frequency and no damping
  Eigen::MatrixXd basis(n, 3);
  Eigen::VectorXd yy(n);
  const double w0 = two_pi * f_guess;
  for (int k = 0; k < n; ++k) {
    const double tk = t[k] - t0;
    basis(k, 0) = 1.0;
    basis(k, 1) = std::cos(w0 * tk);
    basis(k, 2) = std::sin(w0 * tk);
    yy[k] = y[k];
  }
  const Eigen::VectorXd lin = basis.colPivHouseholderQr().solve(yy);

  // parameters scaled to O(1): [a, d, kappa*span, gamma*span, b, c, f/f_guess]
  const double ys = amp > 0 ? amp : 1.0;
  Eigen::VectorXd p(7);
  p << (lin[0] - mean) / ys, 0.0, 1.0, 0.1, lin[1] / ys, lin[2] / ys, 1.0;
  auto model = [&](const Eigen::VectorXd& q, int k) {
    const double tk = (t[k] - t0) / span;
    const double w = two_pi * f_guess * q[6] * span;
    return mean + ys * (q[0] + q[1] * std::exp(-q[2] * tk) +
                        std::exp(-q[3] * tk) * (q[4] * std::cos(w * tk) + q[5] * std::sin(w * tk)));
  };
  const auto res = least_squares(
      [&](const Eigen::VectorXd& q, Eigen::VectorXd& r) {
        for (int k = 0; k < n; ++k) r[k] = model(q, k) - y[k];
      },
      p, n);
  const auto& q = res.p;
  DampedSinusoid out;
  out.frequency = std::abs(f_guess * q[6]);
  out.frequency_sigma = f_guess * res.sigma[6];
  out.decay = q[3] / span;
  out.amplitude = ys * std::hypot(q[4], q[5]);
  out.phase = std::atan2(-q[5], q[4]);
  out.offset = mean + ys * q[0];
  out.baseline_amplitude = ys * q[1];
  out.baseline_rate = q[2] / span;
  out.rms = res.rms;
  return out;
}

Lorentzian lorentzian_dip(std::span<const double> x, std::span<const double> y) {
  require_same_size(x, y, 5);
  const int n = static_cast<int>(x.size());
  const auto [mn, mx] = std::minmax_element(y.begin(), y.end());
  const double base = std::max(y.front(), y.back());
  const double depth = base - *mn;
  const double x0 = x[mn - y.begin()];
  // half-depth crossing for the width guess
  double w = (x.back() - x.front()) / 10.0;
  for (int k = static_cast<int>(mn - y.begin()); k < n; ++k) {
    if (base - y[k] < 0.5 * depth) {
      w = std::max(x[k] - x0, 1e-12 * std::abs(x0) + 1e-300);
      break;
    }
  }
  const double ys = (depth > 0) ? depth : (std::abs(*mx) > 0 ? std::abs(*mx) : 1.0);
  const double xs = w;
  Eigen::VectorXd p(4);
  p << 0.0, 1.0, depth / ys, (base - *mn) / ys;  // [center shift, width, depth, baseline - min]
  auto model = [&](const Eigen::VectorXd& q, int k) {
    const double u = (x[k] - (x0 + q[0] * xs)) / (q[1] * xs);
    return *mn + ys * (q[3] - q[2] / (1.0 + u * u));
  };
  const auto res = least_squares(
      [&](const Eigen::VectorXd& q, Eigen::VectorXd& r) {
        for (int k = 0; k < n; ++k) r[k] = model(q, k) - y[k];
      },
      p, n);
  const auto& q = res.p;
  Lorentzian out;
  out.center = x0 + q[0] * xs;
  out.hwhm = std::abs(q[1]) * xs;
  out.depth = q[2] * ys;
  out.baseline = *mn + ys * q[3];
  out.rms = res.rms;
  return out;
}

}  // namespace nvmag::fit
