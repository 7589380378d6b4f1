#pragma once

// Embedding-network presets over [B, 2, N] I/Q input, and the classifier that
// puts a linear head on top of one.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "sigdistill/tensor.hpp"

namespace sigdistill {

// identity is the parameter-free flatten map, useful for checking losses by hand.
enum class Arch { cnn2, alexnet1d, vgg_lite, resnet1d_lite, identity };

std::string_view arch_name(Arch a);
Arch parse_arch(std::string_view name);
// The four network presets (identity excluded).
std::vector<Arch> all_archs();

// Kaiming-uniform bound for a layer with the given fan-in: sqrt(6 / fan_in).
double kaiming_bound(std::size_t fan_in);

template <typename T>
class EmbeddingNet {
 public:
  // Draws fresh parameters: Kaiming-uniform weights, zero biases.
  // Deterministic per seed; parameters require gradients only if trainable.
  static EmbeddingNet sample(Arch arch, std::size_t input_length, std::uint64_t seed,
                             bool trainable = false);

  // [B, 2, N] -> [B, feature_dim()]
  ad::Tensor<T> forward(const ad::Tensor<T>& x) const;

  Arch arch() const noexcept { return arch_; }
  std::size_t input_length() const noexcept { return input_length_; }
  std::size_t feature_dim() const noexcept { return feature_dim_; }
  std::vector<ad::Tensor<T>> parameters() const;

 private:
  struct Conv {
    ad::Tensor<T> weight;
    ad::Tensor<T> bias;
    std::size_t stride = 1;
    std::size_t padding = 0;
  };
  enum class Kind { conv, relu, pool, residual };
  struct Step {
    Kind kind;
    Conv first;
    Conv second;  // residual blocks only
    std::size_t width = 0;
    std::size_t stride = 0;
  };

  Arch arch_ = Arch::cnn2;
  std::size_t input_length_ = 0;
  std::size_t feature_dim_ = 0;
  std::vector<Step> steps_;
};

// sample_network under the name used across the toolkit.
template <typename T>
EmbeddingNet<T> sample_network(Arch arch, std::size_t input_length, std::uint64_t seed) {
  return EmbeddingNet<T>::sample(arch, input_length, seed, false);
}

template <typename T>
class Classifier {
 public:
  static Classifier sample(Arch arch, std::size_t input_length, std::size_t num_classes,
                           std::uint64_t seed);

  // [B, 2, N] -> logits [B, num_classes]
  ad::Tensor<T> forward(const ad::Tensor<T>& x) const;
  std::vector<ad::Tensor<T>> parameters() const;
  std::size_t num_classes() const noexcept { return num_classes_; }
  const EmbeddingNet<T>& body() const noexcept { return body_; }

 private:
  EmbeddingNet<T> body_;
  ad::Tensor<T> head_weight_;
  ad::Tensor<T> head_bias_;
  std::size_t num_classes_ = 0;
};

extern template class EmbeddingNet<float>;
extern template class EmbeddingNet<double>;
extern template class Classifier<float>;
extern template class Classifier<double>;

}  // namespace sigdistill
