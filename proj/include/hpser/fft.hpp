#pragma once

#include <complex>
#include <span>
#include <vector>

namespace hpser {

// In-place forward DFT of arbitrary length >= 1. Powers of two run the
// iterative radix-2 kernel; other lengths go through the Bluestein chirp-z
// transform on top of it.
void fft(std::vector<std::complex<double>>& a);

// In-place inverse DFT (includes the 1/N scale).
void ifft(std::vector<std::complex<double>>& a);

// One-sided DFT of a real signal, zero-padded (or truncated) to n points.
// Returns n/2 + 1 bins, bin k at frequency k * sample_rate / n.
std::vector<std::complex<double>> rfft(std::span<const double> x, size_t n);

} // namespace hpser
