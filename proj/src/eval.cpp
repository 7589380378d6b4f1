#include "sigdistill/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sigdistill/error.hpp"
#include "sigdistill/parallel.hpp"
#include "sigdistill/rng.hpp"

namespace sigdistill {

void EvalConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ValidationError("eval: lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("eval: momentum must lie in [0, 1)");
  if (batch_size < 1) throw ValidationError("eval: batch_size must be positive");
  if (n_runs < 1) throw ValidationError("eval: n_runs must be at least 1");
}

namespace {

void require_compatible(const LabeledSignalSet& train, const LabeledSignalSet& test) {
  if (train.class_names() != test.class_names())
    throw ValidationError("class mismatch between training and test sets");
  if (train.samples_per_channel() != test.samples_per_channel())
    throw ValidationError("record length mismatch: train N=" + std::to_string(train.samples_per_channel()) +
                          ", test N=" + std::to_string(test.samples_per_channel()));
}

}  // namespace

Classifier<float> train_classifier(const LabeledSignalSet& train, const EvalConfig& cfg,
                                   std::uint64_t run_seed) {
  cfg.validate();
  if (train.empty()) throw ValidationError("eval: cannot train on an empty set");
  auto model = Classifier<float>::sample(cfg.arch, train.samples_per_channel(), train.num_classes(), run_seed);
  auto params = model.parameters();
  std::vector<std::vector<double>> velocity;
  for (const auto& p : params) velocity.emplace_back(p.numel(), 0.0);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::size_t> labels;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto rng = make_rng(run_seed, {stream_tag::shuffle, epoch});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::span<const std::size_t> idx(order.data() + start, stop - start);
      labels.clear();
      for (auto i : idx) labels.push_back(train[i].label);

      ad::Tensor<float> loss;
      try {
        loss = ad::cross_entropy(model.forward(records_to_tensor<float>(train, idx)),
                                 std::span<const std::size_t>(labels));
      } catch (const NumericalError& e) {
        throw NumericalError("classifier training diverged in epoch " + std::to_string(epoch) + ": " +
                             e.what());
      }
      ad::backward(loss);

      for (std::size_t p = 0; p < params.size(); ++p) {
        auto data = params[p].mutable_data();
        const auto grad = params[p].grad();
        auto& v = velocity[p];
        for (std::size_t i = 0; i < data.size(); ++i) {
          v[i] = cfg.momentum * v[i] + static_cast<double>(grad[i]);
          data[i] = static_cast<float>(static_cast<double>(data[i]) - cfg.lr * v[i]);
        }
        params[p].zero_grad();
      }
    }
  }
  return model;
}

std::vector<std::size_t> predict(const Classifier<float>& model, const LabeledSignalSet& set) {
  ad::NoGradGuard no_grad;
  constexpr std::size_t chunk = 256;
  std::vector<std::size_t> out;
  out.reserve(set.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < set.size(); start += chunk) {
    idx.clear();
    for (std::size_t i = start; i < std::min(set.size(), start + chunk); ++i) idx.push_back(i);
    const auto logits = model.forward(records_to_tensor<float>(set, idx));
    const auto e = logits.dim(1);
    const auto z = logits.data();
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const auto row = z.subspan(b * e, e);
      out.push_back(static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()));
    }
  }
  return out;
}

double accuracy_percent(std::span<const std::size_t> predicted, const LabeledSignalSet& test) {
  if (test.empty()) throw ValidationError("eval: test set is empty");
  if (predicted.size() != test.size())
    throw ValidationError("eval: " + std::to_string(predicted.size()) + " predictions for " +
                          std::to_string(test.size()) + " test records");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) correct += predicted[i] == test[i].label;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(test.size());
}

double accuracy_percent(const Classifier<float>& model, const LabeledSignalSet& test) {
  return accuracy_percent(predict(model, test), test);
}

EvalResult summarize(std::vector<double> per_run, const EvalConfig& cfg) {
  if (per_run.empty()) throw ValidationError("eval: no runs to summarize");
  EvalResult r;
  const double n = static_cast<double>(per_run.size());
  r.mean_accuracy = std::accumulate(per_run.begin(), per_run.end(), 0.0) / n;
  double ss = 0.0;
  for (double a : per_run) ss += (a - r.mean_accuracy) * (a - r.mean_accuracy);
  r.std_accuracy = std::sqrt(ss / n);
  r.per_run = std::move(per_run);
  r.config = cfg;
  return r;
}

std::uint64_t eval_run_seed(std::uint64_t seed, std::size_t run) {
  return derive_seed(seed, {stream_tag::eval_run, run});
}

EvalResult evaluate(const LabeledSignalSet& train, const LabeledSignalSet& test, const EvalConfig& cfg) {
  cfg.validate();
  require_compatible(train, test);
  if (test.empty()) throw ValidationError("eval: test set is empty");
  std::vector<double> per_run(cfg.n_runs);
  parallel_for(cfg.n_runs, [&](std::size_t run) {
    per_run[run] = accuracy_percent(train_classifier(train, cfg, eval_run_seed(cfg.seed, run)), test);
  });
  return summarize(std::move(per_run), cfg);
}

CrossArchMatrix cross_arch_matrix(const LabeledSignalSet& train, const LabeledSignalSet& test,
                                  std::span<const Arch> distill_archs,
                                  std::span<const Arch> eval_archs, const DistillConfig& dcfg,
                                  const EvalConfig& ecfg) {
  require_compatible(train, test);
  CrossArchMatrix m;
  m.distill_archs.assign(distill_archs.begin(), distill_archs.end());
  m.eval_archs.assign(eval_archs.begin(), eval_archs.end());
  for (auto c : distill_archs) {
    auto d = dcfg;
    d.arch = c;
    auto synth = mdm_distill(train, d).synthetic;
    std::vector<EvalResult> row;
    for (auto t : eval_archs) {
      auto e = ecfg;
      e.arch = t;
      row.push_back(evaluate(synth, test, e));
    }
    m.cells.push_back(std::move(row));
    m.synthetic.push_back(std::move(synth));
  }
  return m;
}

}  // namespace sigdistill
