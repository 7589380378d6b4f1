#include "sigdistill/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <type_traits>
#include <unordered_set>

#include "sigdistill/error.hpp"

namespace sigdistill::ad {

namespace {

thread_local bool g_grad_enabled = true;

template <typename T>
bool all_finite(const std::vector<T>& data) {
  // Branch-free scan: a value is non-finite iff its exponent bits are all set.
  using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  constexpr Bits exp_mask = static_cast<Bits>(sizeof(T) == 4 ? 0x7f800000ull : 0x7ff0000000000000ull);
  Bits bad = 0;
  for (const T v : data) {
    Bits b;
    std::memcpy(&b, &v, sizeof(b));
    bad |= static_cast<Bits>((b & exp_mask) == exp_mask);
  }
  return bad == 0;
}

template <typename T>
void check_finite(const char* op, const std::vector<T>& data) {
  if (!all_finite(data)) throw NumericalError(std::string(op) + " produced a non-finite value");
}

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    throw ValidationError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                          to_string(b.shape()));
}

template <typename T>
void require_rank(const char* op, const char* what, const Tensor<T>& a, std::size_t rank) {
  if (a.rank() != rank)
    throw ValidationError(std::string(op) + ": " + what + " must have rank " +
                          std::to_string(rank) + ", got " + to_string(a.shape()));
}

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_mode_enabled() noexcept { return g_grad_enabled; }

// ---- Tensor -----------------------------------------------------------------

template <typename T>
Tensor<T> Tensor<T>::constant(Shape shape, std::vector<T> data) {
  if (ad::numel(shape) != data.size())
    throw ValidationError("tensor data length " + std::to_string(data.size()) +
                          " does not match shape " + ad::to_string(shape));
  if (!all_finite(data)) throw ValidationError("tensor data contains non-finite values");
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::variable(Shape shape, std::vector<T> data) {
  auto t = constant(std::move(shape), std::move(data));
  t.node_->requires_grad = true;
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  const auto n = ad::numel(shape);
  auto t = constant(std::move(shape), std::vector<T>(n, T{0}));
  t.node_->requires_grad = requires_grad;
  return t;
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  if (!node_->is_leaf()) throw ValidationError("only leaf tensors may be modified in place");
  return node_->data;
}

template <typename T>
void Tensor<T>::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), T{0});
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1)
    throw ValidationError("item() requires a single-element tensor, got " + ad::to_string(shape()));
  return node_->data[0];
}

template <typename T>
Tensor<T> detail::make_result(const char* op, Shape shape, std::vector<T> data,
                              std::initializer_list<const Tensor<T>*> inputs,
                              std::function<void(Node<T>&)> backward) {
  check_finite(op, data);
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  bool needs_grad = false;
  if (g_grad_enabled)
    for (const auto* in : inputs)
      if (in && in->defined() && in->requires_grad()) needs_grad = true;
  if (needs_grad) {
    node->requires_grad = true;
    for (const auto* in : inputs)
      node->parents.push_back(in && in->defined() ? in->node() : std::make_shared<Node<T>>());
    node->backward = std::move(backward);
  }
  return Tensor<T>(std::move(node));
}

// ---- elementwise --------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a, b);
  std::vector<T> out(a.numel());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return detail::make_result<T>("add", a.shape(), std::move(out), {&a, &b}, [](Node<T>& self) {
    for (std::size_t p = 0; p < 2; ++p)
      if (auto* g = detail::parent_grad(self, p))
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("sub", a, b);
  std::vector<T> out(a.numel());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return detail::make_result<T>("sub", a.shape(), std::move(out), {&a, &b}, [](Node<T>& self) {
    if (auto* g = detail::parent_grad(self, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    if (auto* g = detail::parent_grad(self, 1))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a, b);
  std::vector<T> out(a.numel());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return detail::make_result<T>("mul", a.shape(), std::move(out), {&a, &b}, [](Node<T>& self) {
    const auto& x = self.parents[0]->data;
    const auto& y = self.parents[1]->data;
    if (auto* g = detail::parent_grad(self, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * y[i];
    if (auto* g = detail::parent_grad(self, 1))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * x[i];
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, double s) {
  std::vector<T> out(a.numel());
  const auto x = a.data();
  const T k = static_cast<T>(s);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = k * x[i];
  return detail::make_result<T>("scale", a.shape(), std::move(out), {&a}, [k](Node<T>& self) {
    if (auto* g = detail::parent_grad(self, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += k * self.grad[i];
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  std::vector<T> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > T{0} ? x[i] : T{0};
  return detail::make_result<T>("relu", a.shape(), std::move(out), {&a}, [](Node<T>& self) {
    if (auto* g = detail::parent_grad(self, 0))
      for (std::size_t i = 0; i < g->size(); ++i)
        if (self.data[i] > T{0}) (*g)[i] += self.grad[i];
  });
}

// ---- convolution --------------------------------------------------------------

namespace {

// Accumulators live in GCC/Clang vector registers; kVectors of them cover
// one output block.
constexpr std::size_t kVectorBytes = 32;
constexpr std::size_t kVectors = 8;

template <typename T>
constexpr std::size_t block_size() {
  return kVectors * kVectorBytes / sizeof(T);
}

constexpr std::size_t round_up(std::size_t n, std::size_t m) { return (n + m - 1) / m * m; }

// out[f][l] = sum_{c,k} w[f][c][k] * in[c][l + k] for l < out_row (a
// multiple of block_size<T>()). Input rows hold at least out_row + K - 1 values.
template <typename T>
void correlate(const T* __restrict in, std::size_t in_row, std::size_t cin, const T* __restrict w,
               std::size_t cout, std::size_t K, T* __restrict out, std::size_t out_row) {
  typedef T vec __attribute__((vector_size(kVectorBytes)));
  constexpr std::size_t lanes = kVectorBytes / sizeof(T);
  for (std::size_t f = 0; f < cout; ++f) {
    for (std::size_t l0 = 0; l0 < out_row; l0 += block_size<T>()) {
      vec acc[kVectors];
      for (auto& a : acc) a = vec{};
      for (std::size_t c = 0; c < cin; ++c) {
        const T* x = in + c * in_row + l0;
        const T* wr = w + (f * cin + c) * K;
        for (std::size_t k = 0; k < K; ++k) {
          const T wk = wr[k];
          for (std::size_t v = 0; v < kVectors; ++v) {
            vec xv;
            std::memcpy(&xv, x + k + v * lanes, sizeof(vec));
            acc[v] += wk * xv;
          }
        }
      }
      std::memcpy(out + f * out_row + l0, acc, sizeof(acc));
    }
  }
}

// Dot product with fixed lane-split partial sums, so the order of additions
// does not depend on the compiler.
template <typename T>
T dot(const T* __restrict a, const T* __restrict b, std::size_t n) {
  constexpr std::size_t lanes = 8;
  T part[lanes] = {};
  std::size_t i = 0;
  for (; i + lanes <= n; i += lanes)
    for (std::size_t j = 0; j < lanes; ++j) part[j] += a[i + j] * b[i + j];
  T tail{0};
  for (; i < n; ++i) tail += a[i] * b[i];
  T s{0};
  for (std::size_t j = 0; j < lanes; ++j) s += part[j];
  return s + tail;
}

// Output positions lo whose tap lo*stride - padding + k lands inside [0, L).
struct TapRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

TapRange tap_range(std::size_t k, std::size_t L, std::size_t Lo, std::size_t stride,
                   std::size_t padding) {
  std::size_t begin = 0;
  if (padding > k) begin = (padding - k + stride - 1) / stride;
  const std::size_t hi = L - 1 + padding;
  if (k > hi) return {0, 0};
  std::size_t end = std::min(Lo, (hi - k) / stride + 1);
  if (begin >= end) return {0, 0};
  return {begin, end};
}

struct ConvDims {
  std::size_t B, C, L, F, K, Lo, stride, padding;
};

// Zero-padded copy of sample b: rows of `row` values, data starting at `offset`.
template <typename T>
void pad_rows(const T* src, std::size_t rows, std::size_t len, std::size_t offset, std::size_t row,
              std::vector<T>& dst) {
  dst.assign(rows * row, T{0});
  for (std::size_t r = 0; r < rows; ++r) std::copy(src + r * len, src + (r + 1) * len, dst.data() + r * row + offset);
}

template <typename T>
void conv_forward(const ConvDims& d, const T* x, const T* w, const T* bias, T* out) {
  if (d.stride == 1) {
    const std::size_t out_row = round_up(d.Lo, block_size<T>());
    const std::size_t in_row = out_row + d.K - 1;
    std::vector<T> xpad, tmp(d.F * out_row);
    for (std::size_t b = 0; b < d.B; ++b) {
      pad_rows(x + b * d.C * d.L, d.C, d.L, d.padding, in_row, xpad);
      correlate(xpad.data(), in_row, d.C, w, d.F, d.K, tmp.data(), out_row);
      for (std::size_t f = 0; f < d.F; ++f) {
        T* o = out + (b * d.F + f) * d.Lo;
        const T* t = tmp.data() + f * out_row;
        const T bf = bias ? bias[f] : T{0};
        for (std::size_t lo = 0; lo < d.Lo; ++lo) o[lo] = t[lo] + bf;
      }
    }
    return;
  }
  for (std::size_t b = 0; b < d.B; ++b)
    for (std::size_t f = 0; f < d.F; ++f) {
      T* o = out + (b * d.F + f) * d.Lo;
      std::fill(o, o + d.Lo, bias ? bias[f] : T{0});
      for (std::size_t c = 0; c < d.C; ++c) {
        const T* xr = x + (b * d.C + c) * d.L;
        const T* wr = w + (f * d.C + c) * d.K;
        for (std::size_t k = 0; k < d.K; ++k) {
          const auto [lo0, lo1] = tap_range(k, d.L, d.Lo, d.stride, d.padding);
          for (std::size_t lo = lo0; lo < lo1; ++lo) o[lo] += wr[k] * xr[lo * d.stride + k - d.padding];
        }
      }
    }
}

template <typename T>
void conv_input_grad(const ConvDims& d, const T* gy, const T* w, T* gx) {
  if (d.stride == 1) {
    // Full correlation of the output gradient with the flipped, transposed kernel.
    std::vector<T> wt(d.C * d.F * d.K);
    for (std::size_t f = 0; f < d.F; ++f)
      for (std::size_t c = 0; c < d.C; ++c)
        for (std::size_t k = 0; k < d.K; ++k) wt[(c * d.F + f) * d.K + (d.K - 1 - k)] = w[(f * d.C + c) * d.K + k];
    const std::size_t lp = d.L + 2 * d.padding;
    const std::size_t out_row = round_up(lp, block_size<T>());
    const std::size_t in_row = out_row + d.K - 1;
    std::vector<T> gpad, tmp(d.C * out_row);
    for (std::size_t b = 0; b < d.B; ++b) {
      pad_rows(gy + b * d.F * d.Lo, d.F, d.Lo, d.K - 1, in_row, gpad);
      correlate(gpad.data(), in_row, d.F, wt.data(), d.C, d.K, tmp.data(), out_row);
      for (std::size_t c = 0; c < d.C; ++c) {
        T* g = gx + (b * d.C + c) * d.L;
        const T* t = tmp.data() + c * out_row + d.padding;
        for (std::size_t i = 0; i < d.L; ++i) g[i] += t[i];
      }
    }
    return;
  }
  for (std::size_t b = 0; b < d.B; ++b)
    for (std::size_t f = 0; f < d.F; ++f) {
      const T* go = gy + (b * d.F + f) * d.Lo;
      for (std::size_t c = 0; c < d.C; ++c) {
        T* gxr = gx + (b * d.C + c) * d.L;
        const T* wr = w + (f * d.C + c) * d.K;
        for (std::size_t k = 0; k < d.K; ++k) {
          const auto [lo0, lo1] = tap_range(k, d.L, d.Lo, d.stride, d.padding);
          for (std::size_t lo = lo0; lo < lo1; ++lo) gxr[lo * d.stride + k - d.padding] += wr[k] * go[lo];
        }
      }
    }
}

template <typename T>
void conv_weight_grad(const ConvDims& d, const T* gy, const T* x, T* gw) {
  std::vector<double> acc(d.F * d.C * d.K, 0.0);
  if (d.stride == 1) {
    const std::size_t row = d.Lo + d.K - 1;
    std::vector<T> xpad;
    for (std::size_t b = 0; b < d.B; ++b) {
      pad_rows(x + b * d.C * d.L, d.C, d.L, d.padding, row, xpad);
      for (std::size_t f = 0; f < d.F; ++f) {
        const T* go = gy + (b * d.F + f) * d.Lo;
        for (std::size_t c = 0; c < d.C; ++c)
          for (std::size_t k = 0; k < d.K; ++k)
            acc[(f * d.C + c) * d.K + k] += dot(go, xpad.data() + c * row + k, d.Lo);
      }
    }
  } else {
    for (std::size_t b = 0; b < d.B; ++b)
      for (std::size_t f = 0; f < d.F; ++f) {
        const T* go = gy + (b * d.F + f) * d.Lo;
        for (std::size_t c = 0; c < d.C; ++c) {
          const T* xr = x + (b * d.C + c) * d.L;
          for (std::size_t k = 0; k < d.K; ++k) {
            const auto [lo0, lo1] = tap_range(k, d.L, d.Lo, d.stride, d.padding);
            T s{0};
            for (std::size_t lo = lo0; lo < lo1; ++lo) s += go[lo] * xr[lo * d.stride + k - d.padding];
            acc[(f * d.C + c) * d.K + k] += s;
          }
        }
      }
  }
  for (std::size_t i = 0; i < acc.size(); ++i) gw[i] += static_cast<T>(acc[i]);
}

}  // namespace

template <typename T>
Tensor<T> conv1d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 std::size_t stride, std::size_t padding) {
  require_rank("conv1d", "input", input, 3);
  require_rank("conv1d", "kernel", kernel, 3);
  const std::size_t B = input.dim(0), C = input.dim(1), L = input.dim(2);
  const std::size_t F = kernel.dim(0), K = kernel.dim(2);
  if (kernel.dim(1) != C)
    throw ValidationError("conv1d: input " + to_string(input.shape()) +
                          " incompatible with kernel " + to_string(kernel.shape()));
  if (bias.defined() && bias.shape() != Shape{F})
    throw ValidationError("conv1d: bias " + to_string(bias.shape()) + " incompatible with kernel " +
                          to_string(kernel.shape()));
  if (stride == 0) throw ValidationError("conv1d: stride must be positive");
  if (K == 0 || L == 0 || L + 2 * padding < K)
    throw ValidationError("conv1d: kernel " + to_string(kernel.shape()) +
                          " longer than padded input " + to_string(input.shape()));
  const ConvDims d{B, C, L, F, K, (L + 2 * padding - K) / stride + 1, stride, padding};

  std::vector<T> out(B * F * d.Lo);
  conv_forward(d, input.data().data(), kernel.data().data(),
               bias.defined() ? bias.data().data() : nullptr, out.data());

  return detail::make_result<T>(
      "conv1d", {B, F, d.Lo}, std::move(out), {&input, &kernel, &bias}, [d](Node<T>& self) {
        const T* gy = self.grad.data();
        if (auto* gx = detail::parent_grad(self, 0))
          conv_input_grad(d, gy, self.parents[1]->data.data(), gx->data());
        if (auto* gw = detail::parent_grad(self, 1))
          conv_weight_grad(d, gy, self.parents[0]->data.data(), gw->data());
        if (auto* gb = detail::parent_grad(self, 2)) {
          for (std::size_t f = 0; f < d.F; ++f) {
            double acc = 0.0;
            for (std::size_t b = 0; b < d.B; ++b) {
              const T* go = gy + (b * d.F + f) * d.Lo;
              for (std::size_t lo = 0; lo < d.Lo; ++lo) acc += go[lo];
            }
            (*gb)[f] += static_cast<T>(acc);
          }
        }
      });
}

template <typename T>
Tensor<T> max_pool1d(const Tensor<T>& input, std::size_t width, std::size_t stride) {
  require_rank("max_pool1d", "input", input, 3);
  const std::size_t B = input.dim(0), C = input.dim(1), L = input.dim(2);
  if (width == 0 || stride == 0) throw ValidationError("max_pool1d: width and stride must be positive");
  if (L < width)
    throw ValidationError("max_pool1d: width " + std::to_string(width) + " exceeds input " +
                          to_string(input.shape()));
  const std::size_t Lo = (L - width) / stride + 1;
  std::vector<T> out(B * C * Lo);
  const T* x = input.data().data();
  const bool keep = grad_mode_enabled() && input.requires_grad();
  std::vector<std::uint32_t> argmax;
  if (keep) {
    argmax.resize(out.size());
    for (std::size_t r = 0; r < B * C; ++r) {
      const T* xr = x + r * L;
      for (std::size_t lo = 0; lo < Lo; ++lo) {
        std::size_t best = lo * stride;
        for (std::size_t j = best + 1; j < lo * stride + width; ++j)
          if (xr[j] > xr[best]) best = j;
        out[r * Lo + lo] = xr[best];
        argmax[r * Lo + lo] = static_cast<std::uint32_t>(r * L + best);
      }
    }
  } else {
    for (std::size_t r = 0; r < B * C; ++r) {
      const T* xr = x + r * L;
      T* o = out.data() + r * Lo;
      for (std::size_t lo = 0; lo < Lo; ++lo) {
        T m = xr[lo * stride];
        for (std::size_t j = 1; j < width; ++j) m = std::max(m, xr[lo * stride + j]);
        o[lo] = m;
      }
    }
  }
  return detail::make_result<T>("max_pool1d", {B, C, Lo}, std::move(out), {&input},
                                [argmax = std::move(argmax)](Node<T>& self) {
                                  if (auto* g = detail::parent_grad(self, 0))
                                    for (std::size_t i = 0; i < argmax.size(); ++i)
                                      (*g)[argmax[i]] += self.grad[i];
                                });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank("linear", "input", input, 2);
  require_rank("linear", "weight", weight, 2);
  const std::size_t B = input.dim(0), D = input.dim(1), E = weight.dim(1);
  if (weight.dim(0) != D)
    throw ValidationError("linear: input " + to_string(input.shape()) + " incompatible with weight " +
                          to_string(weight.shape()));
  if (bias.defined() && bias.shape() != Shape{E})
    throw ValidationError("linear: bias " + to_string(bias.shape()) + " incompatible with weight " +
                          to_string(weight.shape()));
  std::vector<T> out(B * E, T{0});
  const T* x = input.data().data();
  const T* w = weight.data().data();
  for (std::size_t b = 0; b < B; ++b) {
    T* o = out.data() + b * E;
    if (bias.defined()) std::copy(bias.data().begin(), bias.data().end(), o);
    for (std::size_t d = 0; d < D; ++d) {
      const T xv = x[b * D + d];
      const T* wr = w + d * E;
      for (std::size_t e = 0; e < E; ++e) o[e] += xv * wr[e];
    }
  }
  return detail::make_result<T>(
      "linear", {B, E}, std::move(out), {&input, &weight, &bias}, [=](Node<T>& self) {
        const T* gy = self.grad.data();
        const T* xv = self.parents[0]->data.data();
        const T* wv = self.parents[1]->data.data();
        if (auto* gx = detail::parent_grad(self, 0))
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t d = 0; d < D; ++d) (*gx)[b * D + d] += dot(gy + b * E, wv + d * E, E);
        if (auto* gw = detail::parent_grad(self, 1)) {
          std::vector<double> acc(D * E, 0.0);
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t d = 0; d < D; ++d) {
              const double xd = xv[b * D + d];
              for (std::size_t e = 0; e < E; ++e) acc[d * E + e] += xd * gy[b * E + e];
            }
          for (std::size_t i = 0; i < acc.size(); ++i) (*gw)[i] += static_cast<T>(acc[i]);
        }
        if (self.parents[2]->requires_grad) {
          auto* gb = detail::parent_grad(self, 2);
          for (std::size_t e = 0; e < E; ++e) {
            double acc = 0.0;
            for (std::size_t b = 0; b < B; ++b) acc += gy[b * E + e];
            (*gb)[e] += static_cast<T>(acc);
          }
        }
      });
}

// ---- reshaping and reductions -----------------------------------------------

template <typename T>
Tensor<T> flatten(const Tensor<T>& a) {
  if (a.rank() < 1) throw ValidationError("flatten: needs a batch axis, got " + to_string(a.shape()));
  const std::size_t B = a.dim(0);
  const std::size_t D = B ? a.numel() / B : 0;
  std::vector<T> out(a.data().begin(), a.data().end());
  return detail::make_result<T>("flatten", {B, D}, std::move(out), {&a}, [](Node<T>& self) {
    if (auto* g = detail::parent_grad(self, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> mean_over_batch(const Tensor<T>& a) {
  if (a.rank() < 1 || a.dim(0) == 0)
    throw ValidationError("mean_over_batch: needs a non-empty batch axis, got " + to_string(a.shape()));
  const std::size_t B = a.dim(0);
  const std::size_t D = a.numel() / B;
  std::vector<double> acc(D, 0.0);
  const auto x = a.data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t j = 0; j < D; ++j) acc[j] += x[b * D + j];
  std::vector<T> out(D);
  for (std::size_t j = 0; j < D; ++j) out[j] = static_cast<T>(acc[j] / static_cast<double>(B));
  Shape shape(a.shape().begin() + 1, a.shape().end());
  return detail::make_result<T>("mean_over_batch", shape, std::move(out), {&a}, [B, D](Node<T>& self) {
    if (auto* g = detail::parent_grad(self, 0)) {
      const T inv = static_cast<T>(1.0 / static_cast<double>(B));
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t j = 0; j < D; ++j) (*g)[b * D + j] += self.grad[j] * inv;
    }
  });
}

template <typename T>
Tensor<T> sum_of_squares(const Tensor<T>& a) {
  double acc = 0.0;
  for (const T v : a.data()) acc += static_cast<double>(v) * static_cast<double>(v);
  return detail::make_result<T>("sum_of_squares", {}, {static_cast<T>(acc)}, {&a}, [](Node<T>& self) {
    if (auto* g = detail::parent_grad(self, 0)) {
      const T up = T{2} * self.grad[0];
      const auto& x = self.parents[0]->data;
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += up * x[i];
    }
  });
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> labels) {
  require_rank("cross_entropy", "logits", logits, 2);
  const std::size_t B = logits.dim(0), E = logits.dim(1);
  if (labels.size() != B)
    throw ValidationError("cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                          to_string(logits.shape()));
  if (B == 0) throw ValidationError("cross_entropy: empty batch");
  std::vector<double> probs(B * E);
  double total = 0.0;
  const auto z = logits.data();
  for (std::size_t b = 0; b < B; ++b) {
    if (labels[b] >= E)
      throw ValidationError("cross_entropy: label " + std::to_string(labels[b]) + " out of range for " +
                            std::to_string(E) + " classes");
    double zmax = z[b * E];
    for (std::size_t e = 1; e < E; ++e) zmax = std::max(zmax, static_cast<double>(z[b * E + e]));
    double denom = 0.0;
    for (std::size_t e = 0; e < E; ++e) {
      probs[b * E + e] = std::exp(static_cast<double>(z[b * E + e]) - zmax);
      denom += probs[b * E + e];
    }
    for (std::size_t e = 0; e < E; ++e) probs[b * E + e] /= denom;
    total -= static_cast<double>(z[b * E + labels[b]]) - zmax - std::log(denom);
  }
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  return detail::make_result<T>(
      "cross_entropy", {}, {static_cast<T>(total / static_cast<double>(B))}, {&logits},
      [B, E, probs = std::move(probs), lab = std::move(lab)](Node<T>& self) {
        if (auto* g = detail::parent_grad(self, 0)) {
          const double up = static_cast<double>(self.grad[0]) / static_cast<double>(B);
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t e = 0; e < E; ++e) {
              const double d = probs[b * E + e] - (e == lab[b] ? 1.0 : 0.0);
              (*g)[b * E + e] += static_cast<T>(up * d);
            }
        }
      });
}

// ---- backward -----------------------------------------------------------------

template <typename T>
void backward(const Tensor<T>& root) {
  if (!root.defined() || root.numel() != 1)
    throw ValidationError("backward: root must be a scalar, got " +
                          (root.defined() ? to_string(root.shape()) : std::string("undefined")));
  if (!root.requires_grad()) return;

  // Iterative post-order DFS over nodes that require gradients.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.node().get(), 0}};
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (auto* n : order)
    if (!n->is_leaf()) n->grad.assign(n->data.size(), T{0});
  root.node()->grad_buffer()[0] += T{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if (!(*it)->is_leaf() && (*it)->backward) (*it)->backward(**it);
}

#define SIGDISTILL_AD_INSTANTIATE(T)                                                      \
  template class Tensor<T>;                                                               \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> scale(const Tensor<T>&, double);                                     \
  template Tensor<T> relu(const Tensor<T>&);                                              \
  template Tensor<T> conv1d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,         \
                            std::size_t, std::size_t);                                    \
  template Tensor<T> max_pool1d(const Tensor<T>&, std::size_t, std::size_t);              \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);        \
  template Tensor<T> flatten(const Tensor<T>&);                                           \
  template Tensor<T> mean_over_batch(const Tensor<T>&);                                   \
  template Tensor<T> sum_of_squares(const Tensor<T>&);                                    \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::span<const std::size_t>);       \
  template void backward(const Tensor<T>&);                                               \
  template Tensor<T> detail::make_result(const char*, Shape, std::vector<T>,              \
                                         std::initializer_list<const Tensor<T>*>,         \
                                         std::function<void(Node<T>&)>);

SIGDISTILL_AD_INSTANTIATE(float)
SIGDISTILL_AD_INSTANTIATE(double)

}  // namespace sigdistill::ad
