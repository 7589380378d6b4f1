#pragma once

// Per-channel DFT magnitude, |sum_n x[n] exp(-j 2 pi k n / N)|, without 1/N
// normalization. Power-of-two lengths use an iterative radix-2 FFT; other
// lengths use the direct O(N^2) sum.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "sigdistill/dataio.hpp"
#include "sigdistill/tensor.hpp"

namespace sigdistill {

// Magnitudes below this carry a zero subgradient.
inline constexpr double kMagnitudeEpsilon = 1e-12;

bool is_power_of_two(std::size_t n) noexcept;

// In-place iterative radix-2 forward transform (negative exponent).
void fft_radix2(std::span<std::complex<double>> data);

// Forward DFT of a real sequence; fast path for power-of-two lengths.
std::vector<std::complex<double>> dft(std::span<const double> x);

std::vector<double> dft_magnitude(std::span<const double> channel);
std::vector<float> dft_magnitude(std::span<const float> channel);

// d/dx[n] of sum_k upstream[k] * |X[k]|.
std::vector<double> dft_magnitude_backward(std::span<const double> channel,
                                           std::span<const double> upstream);

struct FreqRecord {
  std::vector<float> i_mag;
  std::vector<float> q_mag;
  std::size_t label = 0;
};

FreqRecord to_frequency(const SignalRecord& record);

// Same set with every record replaced by its magnitude spectrum. Metadata
// (labels, snr) is carried through.
LabeledSignalSet to_frequency(const LabeledSignalSet& set);

namespace ad {

// Differentiable magnitude spectrum along the last axis of x.
template <typename T>
Tensor<T> dft_magnitude(const Tensor<T>& x);

extern template Tensor<float> dft_magnitude(const Tensor<float>&);
extern template Tensor<double> dft_magnitude(const Tensor<double>&);

}  // namespace ad

}  // namespace sigdistill
