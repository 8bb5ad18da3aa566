#include <doctest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "scsco/trainer.hpp"

using namespace scsco;

namespace {

TrainConfig quick_config() {
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 3;
  c.k = 3;
  c.lambda = 0.01;
  c.seed = 11;
  return c;
}

const Dataset& small_dataset() {
  static const Dataset ds = make_toy_dataset(6, 2, 32, 5);
  return ds;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("Adam follows the scalar oracle over five steps") {
    BasicParamStore<double> p;
    p.add("w", TensorD({1, 1, 1, 2}, std::vector<double>{0.5, -1.5}));
    AdamState<double> st = AdamState<double>::zeros_for(p);
    oracle::ScalarAdam o0, o1;
    double w0 = 0.5, w1 = -1.5;
    const double grads0[] = {0.3, -0.1, 0.7, 0.0, -2.0};
    const double grads1[] = {1e-3, 5.0, -4.0, 2.5, 0.2};
    for (int t = 0; t < 5; ++t) {
      BasicParamStore<double> g;
      g.add("w", TensorD({1, 1, 1, 2}, std::vector<double>{grads0[t], grads1[t]}));
      const double lr = 0.01 * (t + 1);
      adam_step(p, g, st, lr);
      w0 = o0.step(w0, grads0[t], lr);
      w1 = o1.step(w1, grads1[t], lr);
      CHECK(p["w"][0] == doctest::Approx(w0).epsilon(1e-12));
      CHECK(p["w"][1] == doctest::Approx(w1).epsilon(1e-12));
    }
    CHECK(st.t == 5);
  }

  TEST_CASE("a first Adam step moves each weight by about lr") {
    ParamStore p;
    p.add("w", Tensor({1, 1, 1, 3}, std::vector<float>{0, 0, 0}));
    ParamStore g;
    g.add("w", Tensor({1, 1, 1, 3}, std::vector<float>{2, -0.5, 0}));
    AdamState<float> st = AdamState<float>::zeros_for(p);
    adam_step(p, g, st, 1e-3);
    CHECK(p["w"][0] == doctest::Approx(-1e-3).epsilon(1e-5));
    CHECK(p["w"][1] == doctest::Approx(1e-3).epsilon(1e-5));
    CHECK(p["w"][2] == 0.0f);
  }

  TEST_CASE("non-finite gradients leave parameters and state untouched") {
    ParamStore p;
    p.add("a", Tensor({1, 1, 1, 2}, 1.0f));
    p.add("b", Tensor({1, 1, 1, 1}, 2.0f));
    ParamStore g = p.zeros_like();
    g["b"][0] = std::numeric_limits<float>::infinity();
    AdamState<float> st = AdamState<float>::zeros_for(p);
    const ParamStore before = p;
    CHECK_THROWS_AS(adam_step(p, g, st, 0.1), NumericError);
    CHECK(p == before);
    CHECK(st.t == 0);
  }

  TEST_CASE("default schedule decays at 100/120 and 110/120 of the run") {
    TrainConfig c;
    c.epochs = 120;
    c.lr0 = 1e-4;
    CHECK(lr_at(0, c) == 1e-4);
    CHECK(lr_at(99, c) == 1e-4);
    CHECK(lr_at(100, c) == doctest::Approx(1e-5));
    CHECK(lr_at(109, c) == doctest::Approx(1e-5));
    CHECK(lr_at(110, c) == doctest::Approx(1e-6));
    c.epochs = 12;
    CHECK(lr_at(9, c) == 1e-4);
    CHECK(lr_at(10, c) == doctest::Approx(1e-5));
    CHECK(lr_at(11, c) == doctest::Approx(1e-6));
    CHECK_THROWS_AS(lr_at(-1, c), InvalidArgument);
  }

  TEST_CASE("explicit decay epochs override the default breakpoints") {
    TrainConfig c;
    c.lr0 = 1.0;
    c.decay_factor = 0.5;
    c.decay_epochs = {2, 5};
    CHECK(lr_at(1, c) == 1.0);
    CHECK(lr_at(2, c) == 0.5);
    CHECK(lr_at(5, c) == 0.25);
    c.decay_epochs = {5, 5};
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
  }

  TEST_CASE("config validation") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.k = 0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = {};
    c.lambda = -1;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = {};
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
  }

  TEST_CASE("triplet loss is a hinge on the distance gap") {
    Tape<double> tape;
    auto rep = [&](std::vector<double> v) {
      return StyleRep<double>{tape.constant(TensorD({1, 1, 1, 2}, std::move(v))), 1.0};
    };
    const auto b = rep({0, 0});
    // D(f, b) = 1, D(f+, b) = 0.25.
    CHECK(triplet_loss(rep({1, -1}), rep({0.25, 0.25}), b, 0.1).value()[0] ==
          doctest::Approx(0.85));
    // D(f, b) = 0.25 < D(f+, b) - margin: clipped to zero.
    CHECK(triplet_loss(rep({0.25, 0.25}), rep({1, 1}), b, 0.1).value()[0] == 0.0);
  }

  TEST_CASE("global norm clipping") {
    ParamStore g;
    g.add("a", Tensor({1, 1, 1, 2}, std::vector<float>{3, 0}));
    g.add("b", Tensor({1, 1, 1, 1}, 4.0f));
    CHECK(clip_global_norm(g, 10.0) == doctest::Approx(5.0));
    CHECK(g["a"][0] == 3.0f);
    CHECK(clip_global_norm(g, 1.0) == doctest::Approx(5.0));
    CHECK(g["a"][0] == doctest::Approx(0.6));
    CHECK(g["b"][0] == doctest::Approx(0.8));
  }

  TEST_CASE("seed derivation separates streams") {
    CHECK(derive_seed(1, 2) == derive_seed(1, 2));
    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2, 0) != derive_seed(2, 1, 0));
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 2, 4));
  }

  TEST_CASE("loss variants parse and print") {
    for (LossVariant v : {LossVariant::kRecOnly, LossVariant::kRecSS, LossVariant::kRecCS,
                          LossVariant::kRecSCS, LossVariant::kRecTriplet})
      CHECK(parse_loss_variant(to_string(v)) == v);
    CHECK_THROWS_AS(parse_loss_variant("gan"), InvalidArgument);
  }

  TEST_CASE("lambda zero trains exactly like reconstruction only") {
    TrainConfig a = quick_config();
    a.lambda = 0;
    TrainConfig b = quick_config();
    b.loss = LossVariant::kRecOnly;
    const StyleExtractor ex = StyleExtractor::standin();
    const TrainResult ra = train(a, small_dataset(), ex);
    const TrainResult rb = train(b, small_dataset(), ex);
    CHECK(ra.params == rb.params);
  }

  TEST_CASE("training is deterministic and reports finite metrics") {
    const StyleExtractor ex = StyleExtractor::standin();
    int calls = 0;
    const TrainResult r1 = train(quick_config(), small_dataset(), ex,
                                 [&](const EpochMetrics&, const ParamStore&) { ++calls; });
    const TrainResult r2 = train(quick_config(), small_dataset(), ex);
    CHECK(calls == 2);
    CHECK(r1.params == r2.params);
    REQUIRE(r1.history.size() == 2);
    for (std::size_t e = 0; e < 2; ++e) {
      CHECK(r1.history[e].total == r2.history[e].total);
      CHECK(std::isfinite(r1.history[e].total));
      CHECK(r1.history[e].ss > 0);
      CHECK(r1.history[e].ss < 1);
      CHECK(r1.history[e].total ==
            doctest::Approx(r1.history[e].rec + 0.01 * (r1.history[e].ss + r1.history[e].cs)));
    }
  }

  TEST_CASE("a singleton final batch still finds donors") {
    TrainConfig c = quick_config();
    c.epochs = 1;
    c.batch_size = 5;  // six samples: batches of 5 and 1
    CHECK_NOTHROW(train(c, small_dataset(), StyleExtractor::standin()));
  }

  TEST_CASE("empty training set is rejected") {
    CHECK_THROWS_AS(train(quick_config(), Dataset{}, StyleExtractor::standin()), InvalidArgument);
  }

  TEST_CASE("toy dataset is deterministic with the requested split") {
    const Dataset a = make_toy_dataset(3, 2, 32, 9);
    const Dataset b = make_toy_dataset(3, 2, 32, 9);
    CHECK(a.train.size() == 3);
    CHECK(a.heldout.size() == 2);
    for (int i = 0; i < 3; ++i) CHECK(bit_equal(a.train[i].composite, b.train[i].composite));
  }
}
