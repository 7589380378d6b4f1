#include "sigdistill/spectral.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "sigdistill/error.hpp"

namespace sigdistill {

namespace {

using cd = std::complex<double>;

template <typename T>
void require_finite(std::span<const T> xs, const char* what) {
  for (const T v : xs)
    if (!std::isfinite(v)) throw ValidationError(std::string(what) + " contains non-finite values");
}

std::vector<cd> direct_dft(std::span<const cd> x) {
  const std::size_t n = x.size();
  std::vector<cd> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cd acc{0.0, 0.0};
    for (std::size_t t = 0; t < n; ++t) {
      // Reduce k*t mod n before scaling so the angle stays small and exact.
      const double angle = -2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
      acc += x[t] * cd{std::cos(angle), std::sin(angle)};
    }
    out[k] = acc;
  }
  return out;
}

// Complex forward transform of arbitrary length.
std::vector<cd> transform(std::vector<cd> x) {
  if (x.empty()) return x;
  if (is_power_of_two(x.size())) {
    fft_radix2(x);
    return x;
  }
  return direct_dft(x);
}

// Magnitude of every bin plus the complex spectrum, computed in double.
std::pair<std::vector<cd>, std::vector<double>> spectrum(std::span<const double> x) {
  auto X = dft(x);
  std::vector<double> mag(X.size());
  for (std::size_t k = 0; k < X.size(); ++k) mag[k] = std::abs(X[k]);
  return {std::move(X), std::move(mag)};
}

// Re(sum_k W[k] exp(+j 2 pi k n / N)) with W[k] = g[k] X[k] / |X[k]|.
// Since Re(z) = Re(conj z), this is the real part of the forward transform
// of conj(W).
std::vector<double> magnitude_vjp(std::span<const cd> X, std::span<const double> mag,
                                  std::span<const double> upstream) {
  std::vector<cd> w(X.size());
  for (std::size_t k = 0; k < X.size(); ++k)
    w[k] = mag[k] < kMagnitudeEpsilon ? cd{0.0, 0.0} : std::conj(X[k]) * (upstream[k] / mag[k]);
  auto y = transform(std::move(w));
  std::vector<double> grad(y.size());
  for (std::size_t n = 0; n < y.size(); ++n) grad[n] = y[n].real();
  return grad;
}

}  // namespace

bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

void fft_radix2(std::span<std::complex<double>> data) {
  const std::size_t n = data.size();
  if (!is_power_of_two(n)) throw ValidationError("fft_radix2 requires a power-of-two length");
  if (n == 1) return;

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    for (std::size_t j = 0; j < half; ++j) {
      // Twiddles evaluated directly per index rather than by recurrence.
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(len);
      const cd w{std::cos(angle), std::sin(angle)};
      for (std::size_t i = 0; i < n; i += len) {
        const cd u = data[i + j];
        const cd v = data[i + j + half] * w;
        data[i + j] = u + v;
        data[i + j + half] = u - v;
      }
    }
  }
}

std::vector<std::complex<double>> dft(std::span<const double> x) {
  require_finite(x, "dft input");
  return transform(std::vector<cd>(x.begin(), x.end()));
}

std::vector<double> dft_magnitude(std::span<const double> channel) {
  if (channel.empty()) throw ValidationError("dft_magnitude: empty channel");
  return spectrum(channel).second;
}

std::vector<float> dft_magnitude(std::span<const float> channel) {
  std::vector<double> x(channel.begin(), channel.end());
  const auto mag = dft_magnitude(std::span<const double>(x));
  return {mag.begin(), mag.end()};
}

std::vector<double> dft_magnitude_backward(std::span<const double> channel,
                                           std::span<const double> upstream) {
  if (channel.empty()) throw ValidationError("dft_magnitude_backward: empty channel");
  if (upstream.size() != channel.size())
    throw ValidationError("dft_magnitude_backward: upstream length " + std::to_string(upstream.size()) +
                          " != channel length " + std::to_string(channel.size()));
  require_finite(upstream, "upstream gradient");
  const auto [X, mag] = spectrum(channel);
  return magnitude_vjp(X, mag, upstream);
}

FreqRecord to_frequency(const SignalRecord& record) {
  return {dft_magnitude(std::span<const float>(record.i_channel)),
          dft_magnitude(std::span<const float>(record.q_channel)), record.label};
}

LabeledSignalSet to_frequency(const LabeledSignalSet& set) {
  LabeledSignalSet out(set.class_names(), set.samples_per_channel());
  out.reserve(set.size());
  for (const auto& r : set.records()) {
    auto f = to_frequency(r);
    out.add({std::move(f.i_mag), std::move(f.q_mag), r.label, r.snr_db});
  }
  return out;
}

namespace ad {

template <typename T>
Tensor<T> dft_magnitude(const Tensor<T>& x) {
  if (x.rank() < 1 || x.shape().back() == 0)
    throw ValidationError("dft_magnitude: needs a non-empty last axis, got " + to_string(x.shape()));
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.numel() / n;
  const bool keep = grad_mode_enabled() && x.requires_grad();

  std::vector<T> out(x.numel());
  std::vector<cd> spectra;
  std::vector<double> mags;
  if (keep) {
    spectra.resize(x.numel());
    mags.resize(x.numel());
  }
  std::vector<double> row(n);
  const auto in = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < n; ++i) row[i] = static_cast<double>(in[r * n + i]);
    auto [X, mag] = spectrum(row);
    for (std::size_t k = 0; k < n; ++k) out[r * n + k] = static_cast<T>(mag[k]);
    if (keep) {
      std::copy(X.begin(), X.end(), spectra.begin() + static_cast<std::ptrdiff_t>(r * n));
      std::copy(mag.begin(), mag.end(), mags.begin() + static_cast<std::ptrdiff_t>(r * n));
    }
  }

  return detail::make_result<T>(
      "dft_magnitude", x.shape(), std::move(out), {&x},
      [n, rows, spectra = std::move(spectra), mags = std::move(mags)](Node<T>& self) {
        auto* g = detail::parent_grad(self, 0);
        if (!g) return;
        std::vector<double> up(n);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t k = 0; k < n; ++k) up[k] = static_cast<double>(self.grad[r * n + k]);
          const auto grad = magnitude_vjp(std::span<const cd>(spectra).subspan(r * n, n),
                                          std::span<const double>(mags).subspan(r * n, n), up);
          for (std::size_t i = 0; i < n; ++i) (*g)[r * n + i] += static_cast<T>(grad[i]);
        }
      });
}

template Tensor<float> dft_magnitude(const Tensor<float>&);
template Tensor<double> dft_magnitude(const Tensor<double>&);

}  // namespace ad

}  // namespace sigdistill
