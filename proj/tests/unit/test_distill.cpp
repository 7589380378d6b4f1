#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "sigdistill/distill.hpp"
#include "sigdistill/error.hpp"
#include "sigdistill/spectral.hpp"
#include "support/fixtures.hpp"
#include "support/instances.hpp"
#include "support/oracles.hpp"

using namespace sigdistill;
using namespace sigdistill::testing;
using TD = ad::Tensor<double>;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

LabeledSignalSet desk_train(std::size_t classes, std::size_t per_class, std::size_t n, std::uint64_t seed) {
  return random_set(classes, per_class, n, seed);
}

DistillConfig small_config() {
  DistillConfig cfg;
  cfg.iterations = 7;
  cfg.eta = 1e-3;
  cfg.alpha = 0.5;
  cfg.spc = 2;
  cfg.real_batch_per_class = 6;
  cfg.arch = Arch::cnn2;
  cfg.seed = 3;
  cfg.report_every = 3;
  return cfg;
}

}  // namespace

TEST_SUITE("distill") {
  TEST_CASE("losses equal the straight-line computation") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
      const auto inst = tiny_instance(2, 3, 2, 16, rng);
      const auto net = EmbeddingNet<double>::sample(Arch::cnn2, 16, 100 + trial);
      const double td = loss_time_domain<double>(net, inst.real, inst.synth).item();
      const double fd = loss_freq_domain<double>(net, inst.real, inst.synth).item();
      CHECK(rel(td, naive_matching_loss(net.parameters(), inst.real_sig, inst.synth_sig)) <= 1e-6);
      CHECK(rel(fd, naive_matching_loss(net.parameters(), spectra(inst.real_sig), spectra(inst.synth_sig))) <= 1e-6);
    }
  }

  TEST_CASE("identical real and synthetic batches give zero loss") {
    std::mt19937_64 rng(2);
    const auto inst = tiny_instance(3, 4, 4, 16, rng);
    std::vector<TD> same;
    for (const auto& sig : inst.real_sig) same.push_back(to_tensor(sig, true));
    const auto net = EmbeddingNet<double>::sample(Arch::cnn2, 16, 1);
    CHECK(loss_time_domain<double>(net, inst.real, same).item() <= 1e-10);
    CHECK(loss_freq_domain<double>(net, inst.real, same).item() <= 1e-10);
  }

  TEST_CASE("identity embedding: squared distance of means") {
    const auto net = EmbeddingNet<double>::sample(Arch::identity, 4, 0);
    std::vector<double> r(8, 0.0), s(8, 0.0);
    r[0] = 1.0;
    const std::vector<TD> real{TD::constant({1, 2, 4}, r)};
    const std::vector<TD> synth{TD::variable({1, 2, 4}, s)};
    CHECK(loss_time_domain<double>(net, real, synth).item() == doctest::Approx(1.0));
  }

  TEST_CASE("magnitude spectrum ignores circular shifts") {
    std::mt19937_64 rng(3);
    const auto net = EmbeddingNet<double>::sample(Arch::identity, 16, 0);
    Signal x{random_vector(16, rng), random_vector(16, rng)};
    Signal shifted = x;
    for (auto& ch : shifted) std::rotate(ch.begin(), ch.begin() + 5, ch.end());
    const std::vector<TD> real{to_tensor({x}, false)};
    const std::vector<TD> synth{to_tensor({shifted}, true)};
    CHECK(loss_freq_domain<double>(net, real, synth).item() <= 1e-6);
    CHECK(loss_time_domain<double>(net, real, synth).item() > 0.1);
  }

  TEST_CASE("combined loss arithmetic") {
    CHECK(combined_loss(0.3, 0.2, 1.0) == doctest::Approx(0.5));
    CHECK(combined_loss(0.0, 0.25, 2.0) == doctest::Approx(0.5));
    CHECK(combined_loss(0.7, 123.0, 0.0) == 0.7);
    const auto a = TD::constant({}, {0.3});
    const auto b = TD::constant({}, {0.2});
    CHECK(combined_loss(a, b, 1.0).item() == doctest::Approx(0.5));
  }

  TEST_CASE("empty or mismatched class batches are rejected") {
    const auto net = EmbeddingNet<double>::sample(Arch::identity, 4, 0);
    const std::vector<TD> one{TD::zeros({1, 2, 4})};
    const std::vector<TD> empty_batch{TD::zeros({0, 2, 4})};
    const std::vector<TD> none;
    CHECK_THROWS_AS(loss_time_domain<double>(net, one, empty_batch), ValidationError);
    CHECK_THROWS_AS(loss_time_domain<double>(net, empty_batch, one), ValidationError);
    CHECK_THROWS_AS(loss_freq_domain<double>(net, one, none), ValidationError);
    CHECK_THROWS_AS(loss_time_domain<double>(net, none, none), ValidationError);
  }

  TEST_CASE("losses are invariant to record order within a class") {
    std::mt19937_64 rng(4);
    auto inst = tiny_instance(2, 5, 3, 16, rng);
    const auto net = EmbeddingNet<double>::sample(Arch::cnn2, 16, 9);
    const double td = loss_time_domain<double>(net, inst.real, inst.synth).item();
    const double fd = loss_freq_domain<double>(net, inst.real, inst.synth).item();
    std::vector<TD> real2, synth2;
    for (std::size_t c = 0; c < 2; ++c) {
      auto r = inst.real_sig[c];
      auto s = inst.synth_sig[c];
      std::reverse(r.begin(), r.end());
      std::rotate(s.begin(), s.begin() + 1, s.end());
      real2.push_back(to_tensor(r, false));
      synth2.push_back(to_tensor(s, true));
    }
    CHECK(rel(loss_time_domain<double>(net, real2, synth2).item(), td) <= 1e-6);
    CHECK(rel(loss_freq_domain<double>(net, real2, synth2).item(), fd) <= 1e-6);
  }

  TEST_CASE("end-to-end gradient matches finite differences") {
    std::mt19937_64 rng(5);
    const auto inst = tiny_instance(2, 4, 2, 16, rng);
    const auto net = EmbeddingNet<double>::sample(Arch::cnn2, 16, 11);
    const auto f = [&](const std::vector<TD>& synth) {
      return combined_loss(loss_time_domain<double>(net, inst.real, synth),
                           loss_freq_domain<double>(net, inst.real, synth), 1.0);
    };
    // The loss is piecewise quadratic in S; a step of 1e-5 stays inside one
    // ReLU/max-pool region, where central differences are exact up to rounding.
    const auto r = gradient_check(f, inst.synth, 1e-5);
    CHECK(r.checked > 64);
    CHECK(r.max_rel_error <= 1e-3);
  }

  TEST_CASE("zero step size leaves the initialization unchanged") {
    const auto train = desk_train(3, 20, 16, 1);
    auto cfg = small_config();
    cfg.iterations = 1;
    cfg.eta = 0.0;
    const auto out = mdm_distill(train, cfg);
    CHECK(bit_equal(out.synthetic.base(), initial_synthetic(train, cfg).base()));
    CHECK(out.synthetic.spc() == 2);
    REQUIRE(out.reports.size() == 1);
    CHECK(out.reports[0].iteration == 0);
  }

  TEST_CASE("alpha = 0 reduces to time-domain matching bit for bit") {
    const auto train = desk_train(3, 20, 16, 2);
    auto cfg = small_config();
    cfg.alpha = 0.0;
    cfg.report_every = 1;
    const auto a = mdm_distill(train, cfg);
    const auto b = dm_distill(train, cfg);
    REQUIRE(a.reports.size() == b.reports.size());
    for (std::size_t i = 0; i < a.reports.size(); ++i) {
      CHECK(a.reports[i].l_td == b.reports[i].l_td);
      CHECK(a.reports[i].l_total == b.reports[i].l_total);
    }
    CHECK(bit_equal(a.synthetic.base(), b.synthetic.base()));
  }

  TEST_CASE("reports: cadence, consistency, nonnegativity") {
    const auto train = desk_train(2, 12, 16, 3);
    auto cfg = small_config();
    std::vector<LossReport> streamed;
    const auto out = mdm_distill(train, cfg, [&](const LossReport& r) { streamed.push_back(r); });
    std::vector<std::size_t> iters;
    for (const auto& r : out.reports) {
      iters.push_back(r.iteration);
      CHECK(r.l_td >= 0.0);
      CHECK(r.l_fd >= 0.0);
      CHECK(std::abs(r.l_total - (r.l_td + cfg.alpha * r.l_fd)) <= 1e-6 * std::abs(r.l_total));
    }
    CHECK(iters == std::vector<std::size_t>{0, 3, 6});
    CHECK(streamed.size() == out.reports.size());
  }

  TEST_CASE("distillation is deterministic and leaves the real set untouched") {
    const auto train = desk_train(3, 15, 16, 4);
    const auto before = encode_sigds(train);
    const auto cfg = small_config();
    const auto a = mdm_distill(train, cfg);
    const auto b = mdm_distill(train, cfg);
    CHECK(bit_equal(a.synthetic.base(), b.synthetic.base()));
    CHECK(encode_sigds(train) == before);
    CHECK_FALSE(bit_equal(a.synthetic.base(), initial_synthetic(train, cfg).base()));
    auto other = cfg;
    other.seed = 4;
    CHECK_FALSE(bit_equal(a.synthetic.base(), mdm_distill(train, other).synthetic.base()));
  }

  TEST_CASE("the update is a plain gradient step") {
    // With K=1 and a tiny eta, S moves by -eta * grad computed on the same batch.
    const auto train = desk_train(2, 8, 16, 5);
    auto cfg = small_config();
    cfg.iterations = 1;
    cfg.eta = 0.0;
    const auto init = mdm_distill(train, cfg).synthetic;
    cfg.eta = 1e-2;
    const auto stepped = mdm_distill(train, cfg).synthetic;
    cfg.eta = 2e-2;
    const auto stepped2 = mdm_distill(train, cfg).synthetic;
    double moved = 0.0;
    for (std::size_t i = 0; i < init.base().size(); ++i)
      for (std::size_t n = 0; n < 16; ++n) {
        const double d1 = stepped.base()[i].i_channel[n] - init.base()[i].i_channel[n];
        const double d2 = stepped2.base()[i].i_channel[n] - init.base()[i].i_channel[n];
        CHECK(std::abs(d2 - 2 * d1) <= 1e-6);
        moved += std::abs(d1);
      }
    CHECK(moved > 0.0);
  }

  TEST_CASE("preconditions") {
    const auto train = desk_train(2, 3, 16, 6);
    auto cfg = small_config();
    cfg.spc = 4;
    CHECK_THROWS_AS(mdm_distill(train, cfg), ValidationError);
    cfg = small_config();
    cfg.iterations = 0;
    CHECK_THROWS_AS(mdm_distill(train, cfg), ValidationError);
    cfg = small_config();
    cfg.alpha = -1.0;
    CHECK_THROWS_AS(mdm_distill(train, cfg), ValidationError);
    CHECK_THROWS_AS(mdm_distill(LabeledSignalSet({"A"}, 16), small_config()), ValidationError);
  }

  TEST_CASE("divergence names the iteration") {
    const auto train = desk_train(2, 6, 16, 7);
    auto cfg = small_config();
    cfg.eta = 1e30;
    try {
      mdm_distill(train, cfg);
      FAIL("expected divergence");
    } catch (const NumericalError& e) {
      CHECK(std::string(e.what()).find("iteration") != std::string::npos);
    }
  }

  TEST_CASE("real batches are sampled without replacement and capped at class size") {
    std::vector<std::size_t> idx(10);
    std::iota(idx.begin(), idx.end(), 100);
    auto b = sample_real_batch(idx, 256, 1, 0, 0);
    CHECK(b.size() == 10);
    b = sample_real_batch(idx, 4, 1, 0, 0);
    CHECK(b.size() == 4);
    std::sort(b.begin(), b.end());
    CHECK(std::adjacent_find(b.begin(), b.end()) == b.end());
    CHECK(sample_real_batch(idx, 4, 1, 0, 0) == sample_real_batch(idx, 4, 1, 0, 0));
    CHECK(iteration_network_seed(1, 0) != iteration_network_seed(1, 1));
  }
}
