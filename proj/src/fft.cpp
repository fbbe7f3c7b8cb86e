#include "fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>

namespace nvmag::detail {

namespace {
std::mutex planner_mutex;  // FFTW planning is not thread-safe
}

std::vector<std::complex<double>> rfft(std::span<const double> x, std::size_t n_fft) {
  if (n_fft == 0) n_fft = x.size();
  std::vector<double> in(n_fft, 0.0);
  std::copy_n(x.begin(), std::min(x.size(), n_fft), in.begin());
  std::vector<std::complex<double>> out(n_fft / 2 + 1);
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex);
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n_fft), in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex);
    fftw_destroy_plan(plan);
  }
  return out;
}

}  // namespace nvmag::detail
