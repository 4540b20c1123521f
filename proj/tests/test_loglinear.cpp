#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "groupmix/errors.hpp"
#include "groupmix/loglinear.hpp"
#include "groupmix/rng.hpp"
#include "oracles.hpp"

using namespace groupmix;

namespace {

Stimulus two_candidates(std::vector<double> f0, std::vector<double> f1) {
  return Stimulus({{0, std::move(f0)}, {1, std::move(f1)}});
}

}  // namespace

TEST_CASE("stimulus invariants are enforced at construction") {
  CHECK_THROWS_AS(Stimulus(std::vector<Candidate>{{0, {1.0}}}), InvalidInput);
  CHECK_THROWS_AS(Stimulus({{0, {1.0}}, {0, {2.0}}}), InvalidInput);
  CHECK_THROWS_AS(Stimulus({{0, {1.0}}, {1, {2.0, 3.0}}}), InvalidInput);
  CHECK_THROWS_AS(Stimulus({{-1, {1.0}}, {1, {2.0}}}), InvalidInput);
  const Stimulus ok({{3, {1.0}}, {7, {2.0}}});
  CHECK(ok.index_of(7) == 1);
  CHECK(ok.index_of(4) == -1);
}

TEST_CASE("log_distribution hand-checked values") {
  const Stimulus s = two_candidates({1.0, 0.0}, {0.0, 1.0});

  SUBCASE("zero weights give the uniform distribution") {
    const auto logp = log_distribution(s, {0.0, 0.0});
    CHECK(logp[0] == doctest::Approx(std::log(0.5)).epsilon(1e-14));
    CHECK(logp[1] == doctest::Approx(std::log(0.5)).epsilon(1e-14));
  }

  SUBCASE("weight ln 2 on the first feature gives 2/3 vs 1/3") {
    const auto logp = log_distribution(s, {std::log(2.0), 0.0});
    CHECK(std::exp(logp[0]) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(std::exp(logp[1]) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  }

  SUBCASE("identical candidates are uniform for any weights") {
    const Stimulus eq({{0, {1.5, -2.0}}, {1, {1.5, -2.0}}, {2, {1.5, -2.0}}});
    const auto logp = log_distribution(eq, {3.0, -7.0});
    for (double lp : logp) {
      CHECK(std::exp(lp) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    }
  }

  SUBCASE("dimension mismatch names both dimensions") {
    CHECK_THROWS_WITH_AS(log_distribution(s, {1.0}),
                         doctest::Contains("1"), InvalidInput);
  }
}

TEST_CASE("log_distribution properties on random instances") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    const std::size_t c = 2 + rng.below(5);
    const Stimulus s = oracles::random_stimulus(rng, c, n);
    std::vector<double> w(n);
    for (double& x : w) {
      x = rng.uniform(-3.0, 3.0);
    }
    const auto logp = log_distribution(s, w);

    // exp sums to 1
    double total = 0.0;
    for (double lp : logp) {
      total += std::exp(lp);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    // shift invariance: adding a constant vector to every candidate
    std::vector<Candidate> shifted = s.candidates();
    std::vector<double> offset(n);
    for (double& x : offset) {
      x = rng.uniform(-2.0, 2.0);
    }
    for (Candidate& cand : shifted) {
      for (std::size_t i = 0; i < n; ++i) {
        cand.features[i] += offset[i];
      }
    }
    const auto logp2 = log_distribution(Stimulus(std::move(shifted)), w);
    for (std::size_t i = 0; i < logp.size(); ++i) {
      CHECK(std::abs(logp2[i] - logp[i]) < 1e-10);
    }
  }
}

TEST_CASE("log_distribution is stable for scores up to 1e4") {
  const Stimulus s = two_candidates({1e4}, {-1e4});
  const auto logp = log_distribution(s, {1.0});
  for (double lp : logp) {
    CHECK(!std::isnan(lp));
    CHECK(lp <= 0.0);
  }
  CHECK(std::exp(logp[0]) == doctest::Approx(1.0));
}

TEST_CASE("predict follows the max with first-position tie-break") {
  const Stimulus s2 = two_candidates({1.0}, {-1.0});
  CHECK(predict(s2, std::vector<double>{0.2, 0.8}) == 1);
  CHECK(predict(s2, std::vector<double>{0.5, 0.5}) == 0);

  const Stimulus s3({{0, {1.0}}, {1, {2.0}}, {2, {3.0}}});
  CHECK(predict(s3, std::vector<double>{0.1, 0.1, 0.8}) == 2);
  CHECK_THROWS_AS(predict(s3, std::vector<double>{0.5, 0.5}), InvalidInput);
}

TEST_CASE("grad_log_prob hand-checked values") {
  SUBCASE("symmetric two-candidate stimulus") {
    const Stimulus s = two_candidates({1.0}, {-1.0});
    const auto g = grad_log_prob(s, 0, {0.0});
    CHECK(g[0] == doctest::Approx(1.0).epsilon(1e-14));
  }

  SUBCASE("identical candidates give the zero vector") {
    const Stimulus s({{0, {2.0, 1.0}}, {1, {2.0, 1.0}}});
    const auto g = grad_log_prob(s, 1, {0.7, -0.3});
    for (double x : g) {
      CHECK(std::abs(x) < 1e-12);
    }
  }

  SUBCASE("probability one on the observed candidate gives zero gradient") {
    const Stimulus s = two_candidates({1.0}, {-1.0});
    const auto g = grad_log_prob(s, 0, {1000.0});
    CHECK(g[0] == 0.0);
  }

  SUBCASE("unknown observed id") {
    const Stimulus s = two_candidates({1.0}, {-1.0});
    CHECK_THROWS_AS(grad_log_prob(s, 9, {0.0}), InvalidInput);
  }
}

TEST_CASE("grad_log_prob matches central finite differences") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    const std::size_t c = 2 + rng.below(4);
    const Stimulus s = oracles::random_stimulus(rng, c, n);
    std::vector<double> w(n);
    for (double& x : w) {
      x = rng.uniform(-2.0, 2.0);
    }
    const int observed = static_cast<int>(rng.below(c));

    const auto grad = grad_log_prob(s, observed, w);
    const auto fd = oracles::finite_difference_gradient(
        [&](const std::vector<double>& x) {
          return log_distribution(s, x)[static_cast<std::size_t>(
              s.index_of(observed))];
        },
        w);
    for (std::size_t i = 0; i < w.size(); ++i) {
      CHECK(oracles::rel_err(grad[i], fd[i]) < 1e-4);
    }
  }
}

TEST_CASE("encode_binary builds the mirrored two-candidate stimulus") {
  SUBCASE("definition") {
    const auto enc = encode_binary(std::vector<double>{2.0, 0.0}, true);
    CHECK(enc.observed == kAttributeUsed);
    CHECK(enc.stimulus.size() == 2);
    const int pos = enc.stimulus.index_of(kAttributeUsed);
    const int neg = enc.stimulus.index_of(kAttributeUnused);
    CHECK(enc.stimulus.candidates()[pos].features ==
          std::vector<double>{2.0, 0.0});
    CHECK(enc.stimulus.candidates()[neg].features ==
          std::vector<double>{-2.0, -0.0});
  }

  SUBCASE("zero weights are symmetric") {
    const auto enc = encode_binary(std::vector<double>{1.0}, false);
    CHECK(enc.observed == kAttributeUnused);
    const auto logp = log_distribution(enc.stimulus, {0.0});
    CHECK(std::exp(logp[0]) == doctest::Approx(0.5).epsilon(1e-14));
  }

  SUBCASE("hand evaluation of the positive probability") {
    // score gap is 2 w phi': w = ln(3)/2 gives odds 3:1, w = ln(3) odds 9:1
    const auto enc = encode_binary(std::vector<double>{1.0}, true);
    const int pos = enc.stimulus.index_of(kAttributeUsed);

    auto prob_pos = [&](double w) {
      return std::exp(log_distribution(enc.stimulus, {w})[pos]);
    };
    CHECK(prob_pos(std::log(3.0) / 2.0) == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(prob_pos(std::log(3.0)) == doctest::Approx(0.9).epsilon(1e-14));
  }

  SUBCASE("empty features rejected") {
    CHECK_THROWS_AS(encode_binary(std::vector<double>{}, true), InvalidInput);
  }
}
