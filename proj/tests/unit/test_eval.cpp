#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "sigdistill/error.hpp"
#include "sigdistill/eval.hpp"
#include "sigdistill/siggen.hpp"
#include "support/fixtures.hpp"

using namespace sigdistill;
using namespace sigdistill::testing;

namespace {

// Two easily separated schemes at high SNR, short records.
std::pair<LabeledSignalSet, LabeledSignalSet> easy_data(std::size_t per_class, std::uint64_t seed) {
  GenConfig g;
  g.schemes = {Modulation::bpsk, Modulation::cpfsk};
  g.n_per_class = per_class;
  g.samples_per_record = 32;
  g.snr_db_min = 16;
  g.snr_db_max = 18;
  g.seed = seed;
  return split_train_test(generate_dataset(g), 0.5, seed);
}

EvalConfig quick_config(std::size_t epochs = 20) {
  EvalConfig e;
  e.arch = Arch::cnn2;
  e.epochs = epochs;
  e.batch_size = 16;
  e.lr = 0.01;
  e.n_runs = 2;
  e.seed = 5;
  return e;
}

std::vector<float> flat_parameters(const Classifier<float>& c) {
  std::vector<float> out;
  for (const auto& p : c.parameters()) out.insert(out.end(), p.data().begin(), p.data().end());
  return out;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("a classifier trained on one class predicts it everywhere") {
    const auto test = random_set(5, 40, 16, 1);
    LabeledSignalSet only_first(test.class_names(), 16);
    const auto pool = random_set(5, 8, 16, 2);
    for (const auto& r : pool.records())
      if (r.label == 0) only_first.add(r);
    const auto model = train_classifier(only_first, quick_config(30), 3);
    const auto pred = predict(model, test);
    CHECK(std::all_of(pred.begin(), pred.end(), [](std::size_t p) { return p == 0; }));
    CHECK(accuracy_percent(pred, test) == doctest::Approx(20.0));
  }

  TEST_CASE("training is deterministic per run seed") {
    const auto [train, test] = easy_data(30, 1);
    const auto a = train_classifier(train, quick_config(5), 11);
    const auto b = train_classifier(train, quick_config(5), 11);
    const auto c = train_classifier(train, quick_config(5), 12);
    CHECK(flat_parameters(a) == flat_parameters(b));
    CHECK(flat_parameters(a) != flat_parameters(c));
  }

  TEST_CASE("full training data gives a high accuracy on easy data") {
    const auto [train, test] = easy_data(100, 2);
    const auto r = evaluate(train, test, quick_config(15));
    CHECK(r.mean_accuracy >= 90.0);
  }

  TEST_CASE("single run has zero spread; summary fields are reproducible") {
    const auto [train, test] = easy_data(20, 3);
    auto cfg = quick_config(3);
    cfg.n_runs = 1;
    const auto one = evaluate(train, test, cfg);
    CHECK(one.per_run.size() == 1);
    CHECK(one.std_accuracy == 0.0);

    cfg.n_runs = 3;
    const auto r = evaluate(train, test, cfg);
    REQUIRE(r.per_run.size() == 3);
    const double mean = std::accumulate(r.per_run.begin(), r.per_run.end(), 0.0) / 3.0;
    double ss = 0.0;
    for (double a : r.per_run) ss += (a - mean) * (a - mean);
    CHECK(r.mean_accuracy == mean);
    CHECK(r.std_accuracy == std::sqrt(ss / 3.0));
    for (double a : r.per_run) {
      CHECK(a >= 0.0);
      CHECK(a <= 100.0);
    }
    CHECK(r.config.n_runs == 3);
    const auto again = evaluate(train, test, cfg);
    CHECK(again.per_run == r.per_run);
  }

  TEST_CASE("uniform random guesses score near chance") {
    const auto test = random_set(5, 1000, 4, 4);
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<std::size_t> d(0, 4);
    std::vector<std::size_t> guess(test.size());
    for (auto& g : guess) g = d(rng);
    const double binomial_std = 100.0 * std::sqrt(0.2 * 0.8 / static_cast<double>(test.size()));
    CHECK(std::abs(accuracy_percent(guess, test) - 20.0) <= 4 * binomial_std);
  }

  TEST_CASE("accuracy does not depend on test record order") {
    const auto [train, test] = easy_data(40, 5);
    const auto model = train_classifier(train, quick_config(5), 1);
    std::vector<std::size_t> order(test.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), std::mt19937_64(2));
    CHECK(accuracy_percent(model, test) == accuracy_percent(model, test.subset(order)));
  }

  TEST_CASE("mismatched sets are rejected") {
    const auto [train, test] = easy_data(10, 6);
    const auto other = random_set(2, 5, 32, 1);
    CHECK_THROWS_AS(evaluate(train, other, quick_config(1)), ValidationError);
    const auto shorter = random_set(2, 5, 16, 1);
    CHECK_THROWS_AS(evaluate(train, shorter, quick_config(1)), ValidationError);
    CHECK_THROWS_AS(accuracy_percent(std::vector<std::size_t>{0}, test), ValidationError);
    auto bad = quick_config(1);
    bad.lr = 0.0;
    CHECK_THROWS_AS(evaluate(train, test, bad), ValidationError);
    bad = quick_config(1);
    bad.momentum = 1.0;
    CHECK_THROWS_AS(evaluate(train, test, bad), ValidationError);
  }

  TEST_CASE("divergence is reported") {
    const auto [train, test] = easy_data(20, 7);
    auto cfg = quick_config(50);
    cfg.lr = 1e12;
    CHECK_THROWS_AS(train_classifier(train, cfg, 1), NumericalError);
  }

  TEST_CASE("cross-architecture matrix shape and diagonal") {
    const auto [train, test] = easy_data(20, 8);
    DistillConfig d;
    d.iterations = 3;
    d.eta = 1e-3;
    d.spc = 2;
    d.real_batch_per_class = 8;
    d.seed = 2;
    const std::vector<Arch> distill_archs{Arch::cnn2};
    const std::vector<Arch> eval_archs{Arch::cnn2, Arch::resnet1d_lite};
    const auto ecfg = quick_config(3);
    const auto m = cross_arch_matrix(train, test, distill_archs, eval_archs, d, ecfg);
    REQUIRE(m.cells.size() == 1);
    REQUIRE(m.cells[0].size() == 2);
    REQUIRE(m.synthetic.size() == 1);
    auto dd = d;
    dd.arch = Arch::cnn2;
    const auto synth = mdm_distill(train, dd).synthetic;
    CHECK(bit_equal(synth.base(), m.synthetic[0].base()));
    auto e = ecfg;
    e.arch = Arch::cnn2;
    CHECK(evaluate(synth, test, e).per_run == m.cells[0][0].per_run);
    CHECK(m.cells[0][1].config.arch == Arch::resnet1d_lite);
  }
}
