#pragma once

// Independent reference implementations used only by the test suites. Nothing
// here calls into the FFT, the autodiff graph or the distillation loop; each
// routine is the textbook definition written out in double precision.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "sigdistill/tensor.hpp"

namespace sigdistill::testing {

// |sum_n x[n] exp(-j 2 pi k n / N)| by direct O(N^2) summation.
inline std::vector<double> direct_dft_magnitude(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) * static_cast<double>(t) /
                           static_cast<double>(n);
      re += x[t] * std::cos(angle);
      im -= x[t] * std::sin(angle);
    }
    out[k] = std::hypot(re, im);
  }
  return out;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double lo = -1.0,
                                         double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// max_i |a_i - b_i| / max_i |b_i|
inline double max_rel_error(std::span<const double> a, std::span<const double> b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return den > 0.0 ? num / den : num;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// Compares the analytic gradient of a scalar function of several leaf tensors
// with central differences of step h. Coordinates where both gradients are
// below `floor` are skipped. The function must rebuild its graph on each call.
inline GradCheckResult gradient_check(
    const std::function<ad::Tensor<double>(const std::vector<ad::Tensor<double>>&)>& f,
    std::vector<ad::Tensor<double>> inputs, double h = 1e-3, double floor = 1e-6) {
  for (auto& t : inputs) t.zero_grad();
  ad::backward(f(inputs));
  std::vector<std::vector<double>> analytic;
  for (const auto& t : inputs) {
    auto g = t.grad();
    analytic.emplace_back(g.begin(), g.end());
    if (analytic.back().empty()) analytic.back().assign(t.numel(), 0.0);
  }

  GradCheckResult r;
  for (std::size_t p = 0; p < inputs.size(); ++p) {
    if (!inputs[p].requires_grad()) continue;
    auto data = inputs[p].mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + h;
      const double up = f(inputs).item();
      data[i] = saved - h;
      const double down = f(inputs).item();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[p][i];
      const double scale = std::max(std::abs(a), std::abs(numeric));
      if (scale < floor) continue;
      r.max_rel_error = std::max(r.max_rel_error, std::abs(a - numeric) / scale);
      ++r.checked;
    }
  }
  return r;
}

// ---- straight-line cnn2 embedding -------------------------------------------
// The cnn2 preset written as plain loops: conv(k7,p3) relu pool2, conv(k5,p2)
// relu pool2, flatten. Parameters are read from the net's parameter list
// (w1, b1, w2, b2).

using Signal = std::vector<std::vector<double>>;  // [channel][sample]

inline Signal naive_conv(const Signal& x, std::span<const double> w, std::span<const double> b,
                         std::size_t out_ch, std::size_t k, std::size_t pad) {
  const std::size_t in_ch = x.size(), len = x[0].size();
  const std::size_t out_len = len + 2 * pad - k + 1;
  Signal y(out_ch, std::vector<double>(out_len, 0.0));
  for (std::size_t f = 0; f < out_ch; ++f)
    for (std::size_t l = 0; l < out_len; ++l) {
      double acc = b[f];
      for (std::size_t c = 0; c < in_ch; ++c)
        for (std::size_t j = 0; j < k; ++j) {
          const long idx = static_cast<long>(l + j) - static_cast<long>(pad);
          if (idx >= 0 && idx < static_cast<long>(len)) acc += w[(f * in_ch + c) * k + j] * x[c][static_cast<std::size_t>(idx)];
        }
      y[f][l] = acc;
    }
  return y;
}

inline Signal naive_relu_pool2(const Signal& x) {
  Signal y(x.size());
  for (std::size_t c = 0; c < x.size(); ++c)
    for (std::size_t l = 0; l + 1 < x[c].size(); l += 2)
      y[c].push_back(std::max({0.0, x[c][l], x[c][l + 1]}));
  return y;
}

inline std::vector<double> naive_cnn2(const std::vector<ad::Tensor<double>>& params, const Signal& x) {
  auto to_vec = [](const ad::Tensor<double>& t) { return std::vector<double>(t.data().begin(), t.data().end()); };
  const auto w1 = to_vec(params[0]), b1 = to_vec(params[1]);
  const auto w2 = to_vec(params[2]), b2 = to_vec(params[3]);
  auto h = naive_relu_pool2(naive_conv(x, w1, b1, params[0].dim(0), params[0].dim(2), params[0].dim(2) / 2));
  h = naive_relu_pool2(naive_conv(h, w2, b2, params[2].dim(0), params[2].dim(2), params[2].dim(2) / 2));
  std::vector<double> flat;
  for (const auto& row : h) flat.insert(flat.end(), row.begin(), row.end());
  return flat;
}

// Squared distance between mean embeddings, summed over classes.
inline double naive_matching_loss(const std::vector<ad::Tensor<double>>& params,
                                  const std::vector<std::vector<Signal>>& real_by_class,
                                  const std::vector<std::vector<Signal>>& synth_by_class) {
  double total = 0.0;
  for (std::size_t c = 0; c < real_by_class.size(); ++c) {
    auto mean = [&](const std::vector<Signal>& batch) {
      std::vector<double> m;
      for (const auto& s : batch) {
        const auto e = naive_cnn2(params, s);
        if (m.empty()) m.assign(e.size(), 0.0);
        for (std::size_t i = 0; i < e.size(); ++i) m[i] += e[i];
      }
      for (auto& v : m) v /= static_cast<double>(batch.size());
      return m;
    };
    const auto mr = mean(real_by_class[c]);
    const auto ms = mean(synth_by_class[c]);
    for (std::size_t i = 0; i < mr.size(); ++i) total += (mr[i] - ms[i]) * (mr[i] - ms[i]);
  }
  return total;
}

inline Signal naive_spectrum(const Signal& x) {
  Signal y;
  for (const auto& ch : x) y.push_back(direct_dft_magnitude(ch));
  return y;
}

}  // namespace sigdistill::testing
