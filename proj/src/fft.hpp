#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace nvmag::detail {

// Real-to-complex DFT, X_k = sum x_n exp(-2 pi i k n / n_fft), k = 0..n_fft/2.
// Input shorter than n_fft is zero-padded.
std::vector<std::complex<double>> rfft(std::span<const double> x, std::size_t n_fft = 0);

}  // namespace nvmag::detail
