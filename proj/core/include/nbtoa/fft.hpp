#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nbtoa/signal.hpp"

namespace nbtoa::fft {

/// Unnormalized forward DFT: X[k] = sum x[n] exp(-j 2 pi k n / N).
[[nodiscard]] std::vector<cplx> forward(std::span<const cplx> x);

/// Inverse DFT including the 1/N factor.
[[nodiscard]] std::vector<cplx> inverse(std::span<const cplx> X);

/// Smallest n' >= n whose only prime factors are 2, 3, 5 and 7.
[[nodiscard]] std::size_t fast_size(std::size_t n);

/// Signed frequency of DFT bin k for an N-point transform at the given rate, in [-rate/2, rate/2).
[[nodiscard]] double bin_frequency(std::size_t k, std::size_t n, double rate);

} // namespace nbtoa::fft
