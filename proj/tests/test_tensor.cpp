#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "scsco/gradsuite.hpp"
#include "scsco/ops.hpp"

using namespace scsco;

namespace {

struct ConvCase {
  int n, ci, h, w, co, k, stride, pad;
};

// 24 shapes covering 1x1 and 3x3 kernels, strides 1 and 2, padding 0 and 1,
// odd sizes and batch > 1.
std::vector<ConvCase> conv_cases() {
  std::vector<ConvCase> out;
  std::mt19937_64 rng(0xc0417);
  std::uniform_int_distribution<int> dim(3, 9), ch(1, 5);
  for (int i = 0; i < 24; ++i) {
    const int k = (i % 3 == 0) ? 1 : 3;
    out.push_back({1 + i % 2, ch(rng), dim(rng), dim(rng), ch(rng), k, 1 + (i / 3) % 2,
                   k == 1 ? 0 : (i / 6) % 2});
  }
  return out;
}

template <typename T>
void check_conv_oracle() {
  std::mt19937_64 rng(17);
  for (const ConvCase& c : conv_cases()) {
    const auto x = oracle::random_tensor<T>(rng, {c.n, c.ci, c.h, c.w});
    const auto w = oracle::random_tensor<T>(rng, {c.co, c.ci, c.k, c.k});
    const auto b = oracle::random_tensor<T>(rng, {1, c.co, 1, 1});
    Tape<T> tape;
    const auto got =
        conv2d(tape.constant(x), tape.constant(w), tape.constant(b), c.stride, c.pad).value();
    CHECK(bit_equal(got, oracle::conv2d(x, w, b, c.stride, c.pad)));
  }
}

template <typename T>
void check_matmul_oracle() {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> dim(1, 17);
  for (int i = 0; i < 24; ++i) {
    const int r = dim(rng), k = dim(rng), c = dim(rng);
    const auto a = oracle::random_tensor<T>(rng, {1, 1, r, k});
    const auto b = oracle::random_tensor<T>(rng, {1, 1, k, c});
    Tape<T> tape;
    CHECK(bit_equal(matmul(tape.constant(a), tape.constant(b)).value(), oracle::matmul(a, b)));
  }
}

template <typename T>
void check_moments_oracle() {
  std::mt19937_64 rng(29);
  std::uniform_int_distribution<int> dim(2, 8);
  for (int i = 0; i < 24; ++i) {
    const Shape s{1 + i % 3, dim(rng), dim(rng), dim(rng)};
    const auto f = oracle::random_tensor<T>(rng, s, -2.0, 3.0);
    // Alternate soft weights with binary masks.
    auto w = oracle::random_tensor<T>(rng, {s.n, 1, s.h, s.w}, 0.0, 1.0);
    if (i % 2 == 1)
      for (T& v : w.data()) v = v > T(0.4) ? T(1) : T(0);
    for (int n = 0; n < s.n; ++n) w.at(n, 0, 0, 0) = 1;
    Tape<T> tape;
    const Moments<T> m = weighted_channel_moments(tape.constant(f), tape.constant(w));
    BasicTensor<T> mu, sigma;
    oracle::weighted_moments(f, w, kEpsInstance, mu, sigma);
    CHECK(bit_equal(m.mu.value(), mu));
    CHECK(bit_equal(m.sigma.value(), sigma));
  }
}

}  // namespace

TEST_SUITE("tensor") {
  TEST_CASE("conv2d matches the loop oracle bitwise") {
    check_conv_oracle<float>();
    check_conv_oracle<double>();
  }

  TEST_CASE("matmul matches the loop oracle bitwise") {
    check_matmul_oracle<float>();
    check_matmul_oracle<double>();
  }

  TEST_CASE("weighted channel moments match the loop oracle bitwise") {
    check_moments_oracle<float>();
    check_moments_oracle<double>();
  }

  TEST_CASE("conv2d output size follows stride and padding") {
    Tape<float> tape;
    auto x = tape.constant(Tensor({1, 2, 8, 8}, 1.0f));
    auto w = tape.constant(Tensor({4, 2, 3, 3}, 1.0f));
    auto b = tape.constant(Tensor({1, 4, 1, 1}, 0.0f));
    CHECK(conv2d(x, w, b, 2, 1).shape() == Shape{1, 4, 4, 4});
    CHECK(conv2d(x, w, b, 1, 0).shape() == Shape{1, 4, 6, 6});
    // Interior output sees all 18 taps.
    CHECK(conv2d(x, w, b, 1, 1).value().at(0, 0, 3, 3) == 18.0f);
    // Corner output only sees 2 * 4 taps.
    CHECK(conv2d(x, w, b, 1, 1).value().at(0, 0, 0, 0) == 8.0f);
  }

  TEST_CASE("shape violations raise InvalidArgument") {
    Tape<float> tape;
    auto a = tape.constant(Tensor({1, 1, 2, 3}));
    auto b = tape.constant(Tensor({1, 1, 2, 3}));
    CHECK_THROWS_AS(matmul(a, b), InvalidArgument);
    CHECK_THROWS_AS(add(a, tape.constant(Tensor({1, 1, 3, 2}))), InvalidArgument);
    auto x = tape.constant(Tensor({1, 2, 4, 4}));
    auto w = tape.constant(Tensor({3, 1, 3, 3}));
    CHECK_THROWS_AS(conv2d(x, w, tape.constant(Tensor({1, 3, 1, 1})), 1, 1), InvalidArgument);
  }

  TEST_CASE("non-finite results raise NumericError") {
    Tape<float> tape;
    auto z = tape.leaf(Tensor({1, 1, 1, 2}, 0.0f));
    CHECK_THROWS_AS(div(tape.constant(Tensor({1, 1, 1, 2}, 1.0f)), z), NumericError);
    Tensor bad({1, 1, 1, 1}, std::numeric_limits<float>::quiet_NaN());
    CHECK_THROWS_AS(tape.leaf(bad), NumericError);
  }

  TEST_CASE("softmax rows sum to one and masked columns vanish") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
      const int r = 7, c = 9;
      const auto logits = oracle::random_tensor<double>(rng, {1, 1, r, c}, -30, 30);
      TensorD mask({1, 1, r, c});
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
          if ((j + trial) % 3 == 0) mask(i, j) = kMaskedLogit;
      Tape<double> tape;
      const TensorD a = softmax_rows(tape.constant(logits), mask).value();
      for (int i = 0; i < r; ++i) {
        double s = 0;
        for (int j = 0; j < c; ++j) {
          s += a(i, j);
          if (mask(i, j) != 0) CHECK(a(i, j) < 1e-20);
          CHECK(a(i, j) >= 0);
        }
        CHECK(std::abs(s - 1.0) < 1e-12);
      }
    }
  }

  TEST_CASE("fully masked softmax row is a degenerate region") {
    Tape<double> tape;
    TensorD mask({1, 1, 2, 2}, kMaskedLogit);
    mask(0, 0) = 0;
    CHECK_THROWS_AS(softmax_rows(tape.constant(TensorD({1, 1, 2, 2})), mask), DegenerateRegion);
  }

  TEST_CASE("moments reject regions without weight") {
    Tape<float> tape;
    CHECK_THROWS_AS(weighted_channel_moments(tape.constant(Tensor({1, 2, 3, 3}, 1.0f)),
                                             tape.constant(Tensor({1, 1, 3, 3}, 0.0f))),
                    DegenerateRegion);
  }

  TEST_CASE("backward replays nodes in reverse order and accumulates fan-out") {
    Tape<double> tape;
    auto x = tape.leaf(TensorD({1, 1, 1, 3}, std::vector<double>{1, -2, 3}));
    auto y = mul(x, x);       // x^2
    auto z = add(y, x);       // x^2 + x
    auto s = sum(z);
    tape.backward(s);
    const TensorD g = tape.grad(x);
    CHECK(g[0] == 3.0);
    CHECK(g[1] == -3.0);
    CHECK(g[2] == 7.0);
    const auto& order = tape.last_backward_order();
    REQUIRE(order.size() >= 3);
    for (std::size_t i = 1; i < order.size(); ++i) CHECK(order[i] < order[i - 1]);
  }

  TEST_CASE("constants receive no gradient") {
    Tape<double> tape;
    auto c = tape.constant(TensorD({1, 1, 1, 2}, 2.0));
    auto x = tape.leaf(TensorD({1, 1, 1, 2}, 3.0));
    tape.backward(sum(mul(c, x)));
    CHECK_FALSE(tape.requires_grad(c));
    CHECK(tape.grad(x)[0] == 2.0);
    CHECK(tape.grad(c)[0] == 0.0);
  }

  TEST_CASE("every primitive passes the finite-difference check") {
    const GradSuiteResult r = run_grad_suite("tensor");
    CHECK(r.reports.size() >= 27);
    for (const GradCheckReport& rep : r.reports) {
      INFO(rep.op, " rel err ", rep.max_rel_err);
      CHECK(rep.pass);
      CHECK(rep.tol == doctest::Approx(1e-4));
    }
  }

  TEST_CASE("unknown gradient scope is rejected") {
    CHECK_THROWS_AS(grad_cases("everything"), InvalidArgument);
  }
}
