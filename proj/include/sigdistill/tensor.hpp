#pragma once

// Minimal reverse-mode autodiff over dense tensors.
//
// A Tensor is a shared handle to a graph node. Ops record their inputs and a
// backward closure only when some input requires a gradient, so forward
// passes over constants (the real batches during distillation) build no graph.
// Leaves accumulate gradients across backward() calls; interior gradients are
// reset at the start of every call.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sigdistill::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  bool is_leaf() const noexcept { return parents.empty(); }
  std::vector<T>& grad_buffer() {
    if (grad.size() != data.size()) grad.assign(data.size(), T{0});
    return grad;
  }
};

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor constant(Shape shape, std::vector<T> data);
  // Leaf that receives gradients.
  static Tensor variable(Shape shape, std::vector<T> data);
  static Tensor zeros(Shape shape, bool requires_grad = false);

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->data.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->is_leaf(); }
  const char* op() const { return node_->op; }

  std::span<const T> data() const { return node_->data; }
  // Only leaves may be written, and never while a graph that read them is live.
  std::span<T> mutable_data();
  // Empty until a backward pass reached this tensor.
  std::span<const T> grad() const { return node_->grad; }
  void zero_grad();
  T item() const;

  const std::shared_ptr<Node<T>>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled() noexcept;

namespace detail {

// Builds the output tensor of an op. Validates finiteness of the forward
// result; records inputs and the backward closure when any input requires a
// gradient and grad mode is on.
template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> data,
                      std::initializer_list<const Tensor<T>*> inputs,
                      std::function<void(Node<T>&)> backward);

// Grad buffer of the idx-th parent when it requires a gradient, else nullptr.
template <typename T>
std::vector<T>* parent_grad(Node<T>& self, std::size_t idx) {
  auto& p = self.parents.at(idx);
  return p->requires_grad ? &p->grad_buffer() : nullptr;
}

}  // namespace detail

// Elementwise ops require identical shapes.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, double s);
template <typename T> Tensor<T> relu(const Tensor<T>& a);

// input [B,C,L], kernel [F,C,K], optional bias [F] -> [B,F,L'] with
// L' = floor((L + 2*padding - K)/stride) + 1.
template <typename T>
Tensor<T> conv1d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 std::size_t stride, std::size_t padding);

// [B,C,L] -> [B,C,floor((L - width)/stride) + 1]
template <typename T>
Tensor<T> max_pool1d(const Tensor<T>& input, std::size_t width, std::size_t stride);

// input [B,D], weight [D,E], optional bias [E] -> [B,E]
template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

// [B, ...] -> [B, prod(...)]
template <typename T> Tensor<T> flatten(const Tensor<T>& a);

// [B, ...] -> [...], sums accumulated in double.
template <typename T> Tensor<T> mean_over_batch(const Tensor<T>& a);

// Scalar sum of squared entries, accumulated in double.
template <typename T> Tensor<T> sum_of_squares(const Tensor<T>& a);

// Mean softmax cross-entropy of logits [B,E] against class indices.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> labels);

// Populates gradients of every requires_grad leaf reachable from root, which
// must hold exactly one element.
template <typename T> void backward(const Tensor<T>& root);

#define SIGDISTILL_AD_DECLARE(T)                                                          \
  extern template class Tensor<T>;                                                        \
  extern template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                      \
  extern template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                      \
  extern template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                      \
  extern template Tensor<T> scale(const Tensor<T>&, double);                              \
  extern template Tensor<T> relu(const Tensor<T>&);                                       \
  extern template Tensor<T> conv1d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
                                   std::size_t, std::size_t);                             \
  extern template Tensor<T> max_pool1d(const Tensor<T>&, std::size_t, std::size_t);       \
  extern template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
  extern template Tensor<T> flatten(const Tensor<T>&);                                    \
  extern template Tensor<T> mean_over_batch(const Tensor<T>&);                            \
  extern template Tensor<T> sum_of_squares(const Tensor<T>&);                             \
  extern template Tensor<T> cross_entropy(const Tensor<T>&, std::span<const std::size_t>); \
  extern template void backward(const Tensor<T>&);                                        \
  extern template Tensor<T> detail::make_result(const char*, Shape, std::vector<T>,       \
                                                std::initializer_list<const Tensor<T>*>,  \
                                                std::function<void(Node<T>&)>);

SIGDISTILL_AD_DECLARE(float)
SIGDISTILL_AD_DECLARE(double)

#undef SIGDISTILL_AD_DECLARE

}  // namespace sigdistill::ad
