#include "nvmag/ode.hpp"

#include "nvmag/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <complex>
#include <cmath>
#include <sstream>

namespace nvmag::ode {

namespace {

using Big = Eigen::Matrix<double, 3 * dim, 3 * dim>;
using BigVec = Eigen::Matrix<double, 3 * dim, 1>;

struct Tableau {
  double c[3];
  double a[3][3];
};

const Tableau& radau() {
  static const Tableau t = [] {
    const double s6 = std::sqrt(6.0);
    Tableau r{};
    r.c[0] = (4.0 - s6) / 10.0;
    r.c[1] = (4.0 + s6) / 10.0;
    r.c[2] = 1.0;
    r.a[0][0] = (88.0 - 7.0 * s6) / 360.0;
    r.a[0][1] = (296.0 - 169.0 * s6) / 1800.0;
    r.a[0][2] = (-2.0 + 3.0 * s6) / 225.0;
    r.a[1][0] = (296.0 + 169.0 * s6) / 1800.0;
    r.a[1][1] = (88.0 + 7.0 * s6) / 360.0;
    r.a[1][2] = (-2.0 - 3.0 * s6) / 225.0;
    r.a[2][0] = (16.0 - s6) / 36.0;
    r.a[2][1] = (16.0 + s6) / 36.0;
    r.a[2][2] = 1.0 / 9.0;
    return r;
  }();
  return t;
}

// A_rk^{-1} = T diag(lambda) T^{-1}; one real eigenvalue and a conjugate pair.
struct Diagonalized {
  Eigen::Matrix3cd t, tinv;
  Eigen::Vector3cd lambda, tinv_ones;
  int real_index = 0, complex_index = 1;
};

const Diagonalized& diagonalized() {
  static const Diagonalized d = [] {
    const Tableau& tb = radau();
    Eigen::Matrix3d ark;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) ark(i, j) = tb.a[i][j];
    Eigen::EigenSolver<Eigen::Matrix3d> es(ark.inverse());
    Diagonalized r;
    r.lambda = es.eigenvalues();
    r.t = es.eigenvectors();
    r.tinv = r.t.inverse();
    r.tinv_ones = r.tinv * Eigen::Vector3cd::Ones();
    int ri = 0;
    for (int k = 1; k < 3; ++k)
      if (std::abs(r.lambda[k].imag()) < std::abs(r.lambda[ri].imag())) ri = k;
    r.real_index = ri;
    for (int k = 0; k < 3; ++k)
      if (k != ri && r.lambda[k].imag() > 0.0) r.complex_index = k;
    return r;
  }();
  return d;
}

Vec radau_step_constant(const Mat& j, double h, const Vec& y) {
  using CVec = Eigen::Matrix<std::complex<double>, dim, 1>;
  using CMat = Eigen::Matrix<std::complex<double>, dim, dim>;
  const Diagonalized& d = diagonalized();
  const Vec hjy = h * (j * y);
  const int r = d.real_index, c = d.complex_index;
  const Mat mr = d.lambda[r].real() * Mat::Identity() - h * j;
  const Vec wr = mr.partialPivLu().solve(d.tinv_ones[r].real() * hjy);
  const CMat mc = d.lambda[c] * CMat::Identity() - h * j.cast<std::complex<double>>();
  const CVec wc = mc.partialPivLu().solve(d.tinv_ones[c] * hjy.cast<std::complex<double>>());
  // last stage: Z_3 = sum_k T(2,k) w_k, the conjugate pair contributing twice the real part
  const Vec z3 = (d.t(2, r).real() * wr) + 2.0 * (d.t(2, c) * wc).real();
  return y + z3;
}

double largest_rate(const MatrixFn& a, double t) {
  Mat m;
  a(t, m);
  return m.cwiseAbs().maxCoeff();
}

}  // namespace

Vec radau_step(const MatrixFn& a, double t, double h, const Vec& y) {
  const Tableau& tb = radau();
  Mat stage[3];
  Vec ay[3];
  for (int i = 0; i < 3; ++i) {
    a(t + tb.c[i] * h, stage[i]);
    ay[i] = stage[i] * y;
  }
  if (stage[0] == stage[1] && stage[1] == stage[2]) return radau_step_constant(stage[0], h, y);
  Big m = Big::Identity();
  BigVec rhs = BigVec::Zero();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      m.block<dim, dim>(dim * i, dim * j) -= (h * tb.a[i][j]) * stage[j];
      rhs.segment<dim>(dim * i) += (h * tb.a[i][j]) * ay[j];
    }
  }
  // stage increments Z_i = Y_i - y
  BigVec z = m.partialPivLu().solve(rhs);
  return y + z.segment<dim>(2 * dim);
}

Vec integrate_linear(const MatrixFn& a, double t0, const Vec& y0, std::span<const double> times,
                     const Options& opt, const Observer& out, Stats* stats) {
  Stats st;
  Vec y = y0;
  double t = t0;
  double h = opt.h_init;
  if (!(h > 0.0)) {
    const double r = largest_rate(a, t0);
    h = r > 0.0 ? 1.0 / r : 1e-9;
  }
  h = std::min(h, opt.h_max);

  for (std::size_t k = 0; k < times.size(); ++k) {
    const double target = times[k];
    if (target < t) throw InvalidArgument("integrate_linear: sample times must be nondecreasing");
    while (t < target) {
      const double remaining = target - t;
      if (remaining <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(target)) {
        t = target;
        break;
      }
      const bool landing = h >= remaining;
      const double hs = landing ? remaining : h;

      const Vec full = radau_step(a, t, hs, y);
      const Vec half = radau_step(a, t, 0.5 * hs, y);
      const Vec two = radau_step(a, t + 0.5 * hs, 0.5 * hs, half);

      double err = 0.0;
      for (int i = 0; i < dim; ++i) {
        double mag = std::max(std::abs(y[i]), std::abs(two[i]));
        if (opt.pair >= 0 && (i == opt.pair || i == opt.pair + 1)) {
          const int p = opt.pair;
          mag = std::max(std::hypot(y[p], y[p + 1]), std::hypot(two[p], two[p + 1]));
        }
        const double sc = opt.atol + opt.rtol * mag;
        err = std::max(err, std::abs(two[i] - full[i]) / (31.0 * sc));
      }
      const double fac = err > 0.0 ? 0.9 * std::pow(err, -1.0 / 6.0) : 4.0;
      if (err <= 1.0) {
        y = two + (two - full) / 31.0;
        t = landing ? target : t + hs;
        ++st.accepted;
        if (!landing || hs >= h) h = std::min(opt.h_max, hs * std::clamp(fac, 0.2, 4.0));
      } else {
        ++st.rejected;
        h = hs * std::clamp(fac, 0.1, 0.9);
        const double hmin = 16.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(t), 1e-12);
        if (h < hmin) {
          std::ostringstream msg;
          msg << "step size underflow at t=" << t << " s (h=" << h
              << " s); largest rate scale " << largest_rate(a, t) << " 1/s";
          throw StiffnessError(msg.str());
        }
      }
      if (st.accepted + st.rejected > opt.max_steps)
        throw StiffnessError("step budget exhausted at t=" + std::to_string(t) +
                             " s; largest rate scale " + std::to_string(largest_rate(a, t)) + " 1/s");
    }
    if (out) out(k, target, y);
  }
  st.last_h = h;
  if (stats) *stats = st;
  return y;
}

}  // namespace nvmag::ode
