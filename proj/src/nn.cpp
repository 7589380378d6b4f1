#include "sigdistill/nn.hpp"

#include <cmath>
#include <string>

#include "sigdistill/error.hpp"
#include "sigdistill/rng.hpp"

namespace sigdistill {

std::string_view arch_name(Arch a) {
  switch (a) {
    case Arch::cnn2: return "cnn2";
    case Arch::alexnet1d: return "alexnet1d";
    case Arch::vgg_lite: return "vgg-lite";
    case Arch::resnet1d_lite: return "resnet1d-lite";
    case Arch::identity: return "identity";
  }
  return "?";
}

Arch parse_arch(std::string_view name) {
  for (auto a : all_archs())
    if (arch_name(a) == name) return a;
  if (name == arch_name(Arch::identity)) return Arch::identity;
  throw ValidationError("unknown architecture '" + std::string(name) +
                        "' (expected cnn2, alexnet1d, vgg-lite, resnet1d-lite or identity)");
}

std::vector<Arch> all_archs() {
  return {Arch::cnn2, Arch::alexnet1d, Arch::vgg_lite, Arch::resnet1d_lite};
}

double kaiming_bound(std::size_t fan_in) { return std::sqrt(6.0 / static_cast<double>(fan_in)); }

namespace {

template <typename T>
ad::Tensor<T> uniform_tensor(ad::Shape shape, std::size_t fan_in, Rng& rng, bool trainable) {
  const double bound = kaiming_bound(fan_in);
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<T> data(ad::numel(shape));
  for (auto& v : data) v = static_cast<T>(dist(rng));
  return trainable ? ad::Tensor<T>::variable(std::move(shape), std::move(data))
                   : ad::Tensor<T>::constant(std::move(shape), std::move(data));
}

template <typename T>
ad::Tensor<T> zero_tensor(ad::Shape shape, bool trainable) {
  return ad::Tensor<T>::zeros(std::move(shape), trainable);
}

}  // namespace

template <typename T>
EmbeddingNet<T> EmbeddingNet<T>::sample(Arch arch, std::size_t input_length, std::uint64_t seed,
                                        bool trainable) {
  if (input_length == 0) throw ValidationError("input length must be positive");
  EmbeddingNet net;
  net.arch_ = arch;
  net.input_length_ = input_length;

  auto rng = make_rng(seed, {stream_tag::network});
  std::size_t channels = 2;
  std::size_t length = input_length;

  auto make_conv = [&](std::size_t in, std::size_t out, std::size_t k) {
    Conv c;
    c.weight = uniform_tensor<T>({out, in, k}, in * k, rng, trainable);
    c.bias = zero_tensor<T>({out}, trainable);
    c.padding = k / 2;
    return c;
  };
  auto conv = [&](std::size_t out, std::size_t k) {
    Step s{Kind::conv, make_conv(channels, out, k), {}, 0, 0};
    net.steps_.push_back(std::move(s));
    net.steps_.push_back({Kind::relu, {}, {}, 0, 0});
    channels = out;
  };
  auto pool = [&] {
    if (length < 2)
      throw ValidationError("input length " + std::to_string(input_length) + " too short for " +
                            std::string(arch_name(arch)));
    net.steps_.push_back({Kind::pool, {}, {}, 2, 2});
    length = (length - 2) / 2 + 1;
  };
  auto residual = [&](std::size_t k) {
    Step s{Kind::residual, make_conv(channels, channels, k), make_conv(channels, channels, k), 0, 0};
    net.steps_.push_back(std::move(s));
  };

  switch (arch) {
    case Arch::cnn2:
      conv(16, 7);
      pool();
      conv(16, 5);
      pool();
      break;
    case Arch::alexnet1d:
      conv(32, 7);
      pool();
      conv(48, 5);
      pool();
      conv(64, 3);
      conv(64, 3);
      conv(32, 3);
      pool();
      break;
    case Arch::vgg_lite:
      for (std::size_t width : {16, 24, 32, 32}) {
        conv(width, 3);
        conv(width, 3);
        pool();
      }
      break;
    case Arch::resnet1d_lite:
      conv(16, 5);
      for (int b = 0; b < 4; ++b) {
        residual(3);
        pool();
      }
      break;
    case Arch::identity:
      break;
  }
  net.feature_dim_ = channels * length;
  return net;
}

template <typename T>
ad::Tensor<T> EmbeddingNet<T>::forward(const ad::Tensor<T>& x) const {
  if (x.rank() != 3 || x.dim(1) != 2 || x.dim(2) != input_length_)
    throw ValidationError(std::string(arch_name(arch_)) + " expects input [B,2," +
                          std::to_string(input_length_) + "], got " + ad::to_string(x.shape()));
  ad::Tensor<T> h = x;
  for (const auto& s : steps_) {
    switch (s.kind) {
      case Kind::conv:
        h = ad::conv1d(h, s.first.weight, s.first.bias, s.first.stride, s.first.padding);
        break;
      case Kind::relu:
        h = ad::relu(h);
        break;
      case Kind::pool:
        h = ad::max_pool1d(h, s.width, s.stride);
        break;
      case Kind::residual: {
        auto y = ad::relu(ad::conv1d(h, s.first.weight, s.first.bias, 1, s.first.padding));
        y = ad::conv1d(y, s.second.weight, s.second.bias, 1, s.second.padding);
        h = ad::relu(ad::add(y, h));
        break;
      }
    }
  }
  return ad::flatten(h);
}

template <typename T>
std::vector<ad::Tensor<T>> EmbeddingNet<T>::parameters() const {
  std::vector<ad::Tensor<T>> out;
  for (const auto& s : steps_) {
    if (s.kind == Kind::conv || s.kind == Kind::residual) {
      out.push_back(s.first.weight);
      out.push_back(s.first.bias);
    }
    if (s.kind == Kind::residual) {
      out.push_back(s.second.weight);
      out.push_back(s.second.bias);
    }
  }
  return out;
}

template <typename T>
Classifier<T> Classifier<T>::sample(Arch arch, std::size_t input_length, std::size_t num_classes,
                                    std::uint64_t seed) {
  if (num_classes == 0) throw ValidationError("classifier needs at least one class");
  Classifier c;
  c.body_ = EmbeddingNet<T>::sample(arch, input_length, seed, true);
  c.num_classes_ = num_classes;
  auto rng = make_rng(seed, {stream_tag::network, 1});
  const auto d = c.body_.feature_dim();
  c.head_weight_ = uniform_tensor<T>({d, num_classes}, d, rng, true);
  c.head_bias_ = zero_tensor<T>({num_classes}, true);
  return c;
}

template <typename T>
ad::Tensor<T> Classifier<T>::forward(const ad::Tensor<T>& x) const {
  return ad::linear(body_.forward(x), head_weight_, head_bias_);
}

template <typename T>
std::vector<ad::Tensor<T>> Classifier<T>::parameters() const {
  auto out = body_.parameters();
  out.push_back(head_weight_);
  out.push_back(head_bias_);
  return out;
}

template class EmbeddingNet<float>;
template class EmbeddingNet<double>;
template class Classifier<float>;
template class Classifier<double>;

}  // namespace sigdistill
