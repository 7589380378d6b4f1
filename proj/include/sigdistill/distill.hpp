#pragma once

// Multi-domain distribution matching.
//
// Each iteration samples one embedding network, draws a real batch per class
// and measures, per class, the squared distance between the mean embedding of
// the real batch and the mean embedding of that class's synthetic records,
// once on raw I/Q (time domain) and once on per-channel DFT magnitudes
// (frequency domain). The class terms are summed, the two domains are
// combined as L = L_td + alpha * L_fd, and the synthetic samples take one
// plain gradient-descent step.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sigdistill/dataio.hpp"
#include "sigdistill/nn.hpp"
#include "sigdistill/tensor.hpp"

namespace sigdistill {

struct DistillConfig {
  std::size_t iterations = 20000;
  double eta = 0.01;
  double alpha = 1.0;
  std::size_t spc = 10;
  std::size_t real_batch_per_class = 256;
  Arch arch = Arch::alexnet1d;
  std::uint64_t seed = 0;
  // Scale magnitude spectra by 1/N before embedding (off: raw magnitudes).
  bool normalize_spectrum = false;
  std::size_t report_every = 100;

  void validate() const;
};

struct LossReport {
  std::size_t iteration = 0;
  double l_td = 0.0;
  double l_fd = 0.0;
  double l_total = 0.0;
};

struct DistillResult {
  SyntheticSet synthetic;
  std::vector<LossReport> reports;
};

using ProgressSink = std::function<void(const LossReport&)>;

// Gathers records into a [B, 2, N] tensor.
template <typename T>
ad::Tensor<T> records_to_tensor(const LabeledSignalSet& set, std::span<const std::size_t> indices,
                                bool requires_grad = false);

// Squared distance between the mean embedding of real inputs (no gradient)
// and the mean embedding of synthetic inputs (gradient flows).
template <typename T>
ad::Tensor<T> matching_term(const EmbeddingNet<T>& net, const ad::Tensor<T>& real,
                            const ad::Tensor<T>& synth);

// Sum over classes of matching_term on raw I/Q. Batches are indexed by class.
template <typename T>
ad::Tensor<T> loss_time_domain(const EmbeddingNet<T>& net, std::span<const ad::Tensor<T>> real_batches,
                               std::span<const ad::Tensor<T>> synth_batches);

// As loss_time_domain, after mapping both sides through the magnitude
// spectrum. Gradients reach the synthetic time-domain samples.
template <typename T>
ad::Tensor<T> loss_freq_domain(const EmbeddingNet<T>& net, std::span<const ad::Tensor<T>> real_batches,
                               std::span<const ad::Tensor<T>> synth_batches,
                               bool normalize_spectrum = false);

double combined_loss(double l_td, double l_fd, double alpha);

template <typename T>
ad::Tensor<T> combined_loss(const ad::Tensor<T>& l_td, const ad::Tensor<T>& l_fd, double alpha) {
  return ad::add(l_td, ad::scale(l_fd, alpha));
}

// Starting point of the optimization: real records drawn per class with
// take_per_class under a seed derived from cfg.seed.
SyntheticSet initial_synthetic(const LabeledSignalSet& train, const DistillConfig& cfg);

// Both domains, L = L_td + alpha * L_fd.
DistillResult mdm_distill(const LabeledSignalSet& train, const DistillConfig& cfg,
                          const ProgressSink& progress = {});

// Time-domain-only matching (the alpha = 0 special case without computing the
// frequency branch). Shares every random stream with mdm_distill.
DistillResult dm_distill(const LabeledSignalSet& train, const DistillConfig& cfg,
                         const ProgressSink& progress = {});

// Per-iteration seeds, exposed so callers can reproduce a single iteration.
std::uint64_t iteration_network_seed(std::uint64_t seed, std::size_t iteration);
std::vector<std::size_t> sample_real_batch(std::span<const std::size_t> class_indices,
                                           std::size_t batch, std::uint64_t seed,
                                           std::size_t iteration, std::size_t class_index);

}  // namespace sigdistill
