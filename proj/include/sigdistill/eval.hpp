#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sigdistill/dataio.hpp"
#include "sigdistill/distill.hpp"
#include "sigdistill/nn.hpp"

namespace sigdistill {

struct EvalConfig {
  Arch arch = Arch::alexnet1d;
  double lr = 0.001;
  double momentum = 0.9;
  std::size_t batch_size = 128;
  std::size_t epochs = 300;
  std::size_t n_runs = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EvalResult {
  double mean_accuracy = 0.0;  // percent
  double std_accuracy = 0.0;   // population std over per_run, percent
  std::vector<double> per_run;
  EvalConfig config;
};

// Trains a fresh classifier on the given set with SGD + momentum on mean
// cross-entropy over shuffled mini-batches. Deterministic per run_seed.
Classifier<float> train_classifier(const LabeledSignalSet& train, const EvalConfig& cfg,
                                   std::uint64_t run_seed);
inline Classifier<float> train_classifier(const SyntheticSet& synth, const EvalConfig& cfg,
                                          std::uint64_t run_seed) {
  return train_classifier(synth.base(), cfg, run_seed);
}

std::vector<std::size_t> predict(const Classifier<float>& model, const LabeledSignalSet& set);

// Percentage of predictions matching the test labels.
double accuracy_percent(std::span<const std::size_t> predicted, const LabeledSignalSet& test);
double accuracy_percent(const Classifier<float>& model, const LabeledSignalSet& test);

// Population mean and std of per-run accuracies.
EvalResult summarize(std::vector<double> per_run, const EvalConfig& cfg);

std::uint64_t eval_run_seed(std::uint64_t seed, std::size_t run);

// n_runs independent trainings on the set, each scored on the test set.
EvalResult evaluate(const LabeledSignalSet& train, const LabeledSignalSet& test, const EvalConfig& cfg);
inline EvalResult evaluate(const SyntheticSet& synth, const LabeledSignalSet& test,
                           const EvalConfig& cfg) {
  return evaluate(synth.base(), test, cfg);
}

struct CrossArchMatrix {
  std::vector<Arch> distill_archs;
  std::vector<Arch> eval_archs;
  std::vector<std::vector<EvalResult>> cells;  // [distill][eval]
  std::vector<SyntheticSet> synthetic;         // one per distill arch
};

// For each distill architecture C, distills with MDM on C, then evaluates the
// result on every architecture T.
CrossArchMatrix cross_arch_matrix(const LabeledSignalSet& train, const LabeledSignalSet& test,
                                  std::span<const Arch> distill_archs,
                                  std::span<const Arch> eval_archs, const DistillConfig& dcfg,
                                  const EvalConfig& ecfg);

}  // namespace sigdistill
