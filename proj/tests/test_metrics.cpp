#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "scsco/metrics.hpp"

using namespace scsco;

namespace {

// Pairwise tally sampled from Bradley-Terry strengths.
PairwiseTally sampled_tally(const std::vector<double>& strength, int games, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PairwiseTally t;
  const std::size_t n = strength.size();
  for (std::size_t i = 0; i < n; ++i) t.methods.push_back("m" + std::to_string(i));
  t.wins.assign(n, std::vector<long long>(n, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      std::bernoulli_distribution first(strength[i] / (strength[i] + strength[j]));
      for (int g = 0; g < games; ++g) ++(first(rng) ? t.wins[i][j] : t.wins[j][i]);
    }
  return t;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("fMSE with an all-ones mask equals MSE exactly") {
    std::mt19937_64 rng(41);
    for (int i = 0; i < 10; ++i) {
      const Tensor a = oracle::random_tensor<float>(rng, {1, 3, 7, 9}, 0, 1);
      const Tensor b = oracle::random_tensor<float>(rng, {1, 3, 7, 9}, 0, 1);
      CHECK(fmse(a, b, Tensor({1, 1, 7, 9}, 1.0f)) == mse(a, b));
    }
  }

  TEST_CASE("MSE 6.5025 is PSNR 40") {
    CHECK(std::abs(psnr_from_mse(6.5025) - 40.0) < 1e-6);
    CHECK(psnr_from_mse(0) == kPsnrCap);
    const Tensor a({1, 3, 4, 4}, 0.25f);
    CHECK(psnr(a, a) == 100.0);
    CHECK(mse(a, a) == 0.0);
  }

  TEST_CASE("MSE is on the 0-255 scale") {
    const Tensor a({1, 3, 2, 2}, 0.0f);
    const Tensor b({1, 3, 2, 2}, 1.0f);
    CHECK(mse(a, b) == 255.0 * 255.0);
  }

  TEST_CASE("fMSE equals the foreground enumeration oracle exactly") {
    std::mt19937_64 rng(42);
    std::bernoulli_distribution fg(0.3);
    for (int i = 0; i < 20; ++i) {
      const Shape s{1 + i % 2, 3, 5 + i % 4, 6};
      const Tensor a = oracle::random_tensor<float>(rng, s, 0, 1);
      const Tensor b = oracle::random_tensor<float>(rng, s, 0, 1);
      Tensor m({s.n, 1, s.h, s.w});
      for (float& v : m.data()) v = fg(rng) ? 1.0f : 0.0f;
      m[0] = 1.0f;
      CHECK(fmse(a, b, m) == oracle::fmse(a, b, m));
    }
  }

  TEST_CASE("fMSE of an empty foreground is degenerate") {
    const Tensor a({1, 3, 2, 2});
    CHECK_THROWS_AS(fmse(a, a, Tensor({1, 1, 2, 2})), DegenerateRegion);
  }

  TEST_CASE("3:1 tally gives a score gap of ln 3") {
    PairwiseTally t{{"a", "b"}, {{0, 3}, {1, 0}}};
    const std::vector<double> s = bt_scores(t);
    CHECK(std::abs((s[0] - s[1]) - std::log(3.0)) < 1e-6);
    CHECK(std::abs(s[0] + s[1]) < 1e-12);
  }

  TEST_CASE("symmetric tally gives equal scores") {
    PairwiseTally t{{"a", "b", "c"}, {{0, 4, 2}, {4, 0, 7}, {2, 7, 0}}};
    for (double v : bt_scores(t)) CHECK(std::abs(v) < 1e-9);
  }

  TEST_CASE("sampled tally recovers the strength ordering") {
    const PairwiseTally t = sampled_tally({1, 2, 4}, 400, 43);
    const std::vector<double> s = bt_scores(t);
    CHECK(s[0] < s[1]);
    CHECK(s[1] < s[2]);
  }

  TEST_CASE("MM log-likelihood never decreases") {
    for (std::uint64_t seed : {1, 2, 3}) {
      const BtFit fit = bt_fit(sampled_tally({1, 3, 2, 5}, 50, seed));
      CHECK(fit.converged);
      for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i)
        CHECK(fit.log_likelihood[i] >=
              fit.log_likelihood[i - 1] - 8 * 2.2e-16 * std::abs(fit.log_likelihood[i]));
    }
  }

  TEST_CASE("tallies without a finite maximum are rejected") {
    // b never beats a.
    CHECK_THROWS_AS(bt_scores(PairwiseTally{{"a", "b"}, {{0, 3}, {0, 0}}}), InvalidArgument);
    // Two groups that never meet.
    CHECK_THROWS_AS(bt_scores(PairwiseTally{{"a", "b", "c", "d"},
                                            {{0, 1, 0, 0}, {1, 0, 0, 0}, {0, 0, 0, 1}, {0, 0, 1, 0}}}),
                    InvalidArgument);
    // Negative counts and non-zero diagonals are malformed.
    CHECK_THROWS_AS(PairwiseTally({{"a", "b"}, {{0, -1}, {1, 0}}}).validate(), InvalidArgument);
    CHECK_THROWS_AS(PairwiseTally({{"a", "b"}, {{2, 1}, {1, 0}}}).validate(), InvalidArgument);
  }

  TEST_CASE("scaling a tally keeps the scores") {
    const PairwiseTally t = sampled_tally({1, 2, 4}, 30, 44);
    const std::vector<double> a = bt_scores(t);
    const std::vector<double> b = bt_scores(t.scaled(5));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-7));
  }
}
