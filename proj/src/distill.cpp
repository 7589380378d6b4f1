#include "sigdistill/distill.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "sigdistill/error.hpp"
#include "sigdistill/parallel.hpp"
#include "sigdistill/rng.hpp"
#include "sigdistill/spectral.hpp"

namespace sigdistill {

void DistillConfig::validate() const {
  if (iterations < 1) throw ValidationError("distill: iterations (K) must be at least 1");
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw ValidationError("distill: eta must be finite and >= 0");
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw ValidationError("distill: alpha must be finite and >= 0");
  if (spc < 1) throw ValidationError("distill: spc must be at least 1");
  if (real_batch_per_class < 1) throw ValidationError("distill: real_batch_per_class must be positive");
  if (report_every < 1) throw ValidationError("distill: report_every must be positive");
}

template <typename T>
ad::Tensor<T> records_to_tensor(const LabeledSignalSet& set, std::span<const std::size_t> indices,
                                bool requires_grad) {
  const std::size_t n = set.samples_per_channel();
  std::vector<T> data;
  data.reserve(indices.size() * 2 * n);
  for (auto i : indices) {
    const auto& r = set[i];
    data.insert(data.end(), r.i_channel.begin(), r.i_channel.end());
    data.insert(data.end(), r.q_channel.begin(), r.q_channel.end());
  }
  ad::Shape shape{indices.size(), 2, n};
  return requires_grad ? ad::Tensor<T>::variable(std::move(shape), std::move(data))
                       : ad::Tensor<T>::constant(std::move(shape), std::move(data));
}

template <typename T>
ad::Tensor<T> matching_term(const EmbeddingNet<T>& net, const ad::Tensor<T>& real,
                            const ad::Tensor<T>& synth) {
  if (real.rank() == 0 || real.dim(0) == 0) throw ValidationError("empty real class batch");
  if (synth.rank() == 0 || synth.dim(0) == 0) throw ValidationError("empty synthetic class batch");
  ad::Tensor<T> real_mean;
  {
    ad::NoGradGuard no_grad;
    real_mean = ad::mean_over_batch(net.forward(real));
  }
  const auto synth_mean = ad::mean_over_batch(net.forward(synth));
  return ad::sum_of_squares(ad::sub(synth_mean, real_mean));
}

namespace {

template <typename T>
void check_batches(std::span<const ad::Tensor<T>> real, std::span<const ad::Tensor<T>> synth) {
  if (real.empty()) throw ValidationError("no class batches given");
  if (real.size() != synth.size())
    throw ValidationError(std::to_string(real.size()) + " real class batches but " +
                          std::to_string(synth.size()) + " synthetic ones");
}

template <typename T>
ad::Tensor<T> spectrum_input(const ad::Tensor<T>& x, bool normalize) {
  auto mag = ad::dft_magnitude(x);
  if (normalize) mag = ad::scale(mag, 1.0 / static_cast<double>(x.shape().back()));
  return mag;
}

}  // namespace

template <typename T>
ad::Tensor<T> loss_time_domain(const EmbeddingNet<T>& net, std::span<const ad::Tensor<T>> real_batches,
                               std::span<const ad::Tensor<T>> synth_batches) {
  check_batches(real_batches, synth_batches);
  ad::Tensor<T> total;
  for (std::size_t c = 0; c < real_batches.size(); ++c) {
    auto term = matching_term(net, real_batches[c], synth_batches[c]);
    total = c == 0 ? term : ad::add(total, term);
  }
  return total;
}

template <typename T>
ad::Tensor<T> loss_freq_domain(const EmbeddingNet<T>& net, std::span<const ad::Tensor<T>> real_batches,
                               std::span<const ad::Tensor<T>> synth_batches, bool normalize_spectrum) {
  check_batches(real_batches, synth_batches);
  ad::Tensor<T> total;
  for (std::size_t c = 0; c < real_batches.size(); ++c) {
    ad::Tensor<T> real_f;
    {
      ad::NoGradGuard no_grad;
      real_f = spectrum_input(real_batches[c], normalize_spectrum);
    }
    auto term = matching_term(net, real_f, spectrum_input(synth_batches[c], normalize_spectrum));
    total = c == 0 ? term : ad::add(total, term);
  }
  return total;
}

double combined_loss(double l_td, double l_fd, double alpha) { return l_td + alpha * l_fd; }

std::uint64_t iteration_network_seed(std::uint64_t seed, std::size_t iteration) {
  return derive_seed(seed, {stream_tag::network, iteration});
}

std::vector<std::size_t> sample_real_batch(std::span<const std::size_t> class_indices,
                                           std::size_t batch, std::uint64_t seed,
                                           std::size_t iteration, std::size_t class_index) {
  const std::size_t b = std::min(batch, class_indices.size());
  std::vector<std::size_t> out;
  out.reserve(b);
  auto rng = make_rng(seed, {stream_tag::batch, iteration, class_index});
  std::sample(class_indices.begin(), class_indices.end(), std::back_inserter(out), b, rng);
  return out;
}

SyntheticSet initial_synthetic(const LabeledSignalSet& train, const DistillConfig& cfg) {
  return take_per_class(train, cfg.spc, derive_seed(cfg.seed, {stream_tag::init}));
}

namespace {

DistillResult run_distillation(const LabeledSignalSet& train, const DistillConfig& cfg,
                               bool with_frequency, const ProgressSink& progress) {
  cfg.validate();
  if (train.empty()) throw ValidationError("distill: training set is empty");
  const std::size_t n = train.samples_per_channel();
  const std::size_t classes = train.num_classes();
  const std::size_t spc = cfg.spc;

  const auto init = initial_synthetic(train, cfg);
  const auto by_class = train.indices_by_class();

  // Real spectra never change; compute once with the same kernel the graph uses.
  std::optional<LabeledSignalSet> real_spectra;
  if (with_frequency) {
    real_spectra = to_frequency(train);
    if (cfg.normalize_spectrum) {
      LabeledSignalSet scaled(train.class_names(), n);
      const auto k = static_cast<float>(1.0 / static_cast<double>(n));
      for (auto r : real_spectra->records()) {
        for (auto& v : r.i_channel) v = k * v;
        for (auto& v : r.q_channel) v = k * v;
        scaled.add(std::move(r));
      }
      real_spectra = std::move(scaled);
    }
  }

  std::vector<std::vector<float>> synth(classes);
  for (const auto& r : init.base().records()) {
    auto& s = synth[r.label];
    s.insert(s.end(), r.i_channel.begin(), r.i_channel.end());
    s.insert(s.end(), r.q_channel.begin(), r.q_channel.end());
  }

  std::vector<LossReport> reports;
  std::vector<double> td(classes), fd(classes);
  std::vector<std::vector<float>> grads(classes);

  for (std::size_t k = 0; k < cfg.iterations; ++k) {
    const auto net = EmbeddingNet<float>::sample(cfg.arch, n, iteration_network_seed(cfg.seed, k));
    try {
      parallel_for(classes, [&](std::size_t c) {
        const auto idx = sample_real_batch(by_class[c], cfg.real_batch_per_class, cfg.seed, k, c);
        const auto real = records_to_tensor<float>(train, idx);
        const auto s = ad::Tensor<float>::variable({spc, 2, n}, synth[c]);
        const auto l_td = matching_term(net, real, s);
        ad::Tensor<float> total = l_td;
        if (with_frequency) {
          const auto real_f = records_to_tensor<float>(*real_spectra, idx);
          const auto l_fd = matching_term(net, real_f, spectrum_input(s, cfg.normalize_spectrum));
          fd[c] = l_fd.item();
          total = combined_loss(l_td, l_fd, cfg.alpha);
        }
        td[c] = l_td.item();
        ad::backward(total);
        grads[c].assign(s.grad().begin(), s.grad().end());
      });
    } catch (const NumericalError& e) {
      throw NumericalError("distillation diverged at iteration " + std::to_string(k) + ": " + e.what());
    }

    LossReport report{k, 0.0, 0.0, 0.0};
    for (std::size_t c = 0; c < classes; ++c) {
      report.l_td += td[c];
      if (with_frequency) report.l_fd += fd[c];
    }
    report.l_total = combined_loss(report.l_td, report.l_fd, cfg.alpha);
    if (!std::isfinite(report.l_total))
      throw NumericalError("distillation produced a non-finite loss at iteration " + std::to_string(k));

    for (std::size_t c = 0; c < classes; ++c)
      for (std::size_t i = 0; i < synth[c].size(); ++i)
        synth[c][i] = static_cast<float>(static_cast<double>(synth[c][i]) -
                                         cfg.eta * static_cast<double>(grads[c][i]));

    if (k % cfg.report_every == 0 || k + 1 == cfg.iterations) {
      reports.push_back(report);
      if (progress) progress(report);
    }
  }

  LabeledSignalSet out(train.class_names(), n);
  out.reserve(classes * spc);
  std::vector<std::size_t> taken(classes, 0);
  for (const auto& r : init.base().records()) {
    const auto c = r.label;
    const auto* base = synth[c].data() + taken[c]++ * 2 * n;
    SignalRecord rec;
    rec.i_channel.assign(base, base + n);
    rec.q_channel.assign(base + n, base + 2 * n);
    rec.label = c;
    rec.snr_db = r.snr_db;
    out.add(std::move(rec));
  }
  return {SyntheticSet(std::move(out), spc), std::move(reports)};
}

}  // namespace

DistillResult mdm_distill(const LabeledSignalSet& train, const DistillConfig& cfg,
                          const ProgressSink& progress) {
  return run_distillation(train, cfg, true, progress);
}

DistillResult dm_distill(const LabeledSignalSet& train, const DistillConfig& cfg,
                         const ProgressSink& progress) {
  return run_distillation(train, cfg, false, progress);
}

template ad::Tensor<float> records_to_tensor(const LabeledSignalSet&, std::span<const std::size_t>, bool);
template ad::Tensor<double> records_to_tensor(const LabeledSignalSet&, std::span<const std::size_t>, bool);
template ad::Tensor<float> matching_term(const EmbeddingNet<float>&, const ad::Tensor<float>&,
                                         const ad::Tensor<float>&);
template ad::Tensor<double> matching_term(const EmbeddingNet<double>&, const ad::Tensor<double>&,
                                          const ad::Tensor<double>&);
template ad::Tensor<float> loss_time_domain(const EmbeddingNet<float>&, std::span<const ad::Tensor<float>>,
                                            std::span<const ad::Tensor<float>>);
template ad::Tensor<double> loss_time_domain(const EmbeddingNet<double>&, std::span<const ad::Tensor<double>>,
                                             std::span<const ad::Tensor<double>>);
template ad::Tensor<float> loss_freq_domain(const EmbeddingNet<float>&, std::span<const ad::Tensor<float>>,
                                            std::span<const ad::Tensor<float>>, bool);
template ad::Tensor<double> loss_freq_domain(const EmbeddingNet<double>&, std::span<const ad::Tensor<double>>,
                                             std::span<const ad::Tensor<double>>, bool);

}  // namespace sigdistill
