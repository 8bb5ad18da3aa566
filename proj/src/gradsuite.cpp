#include "scsco/gradsuite.hpp"

#include <random>

#include "scsco/bain.hpp"
#include "scsco/harmonizer.hpp"
#include "scsco/ops.hpp"
#include "scsco/style.hpp"
#include "scsco/trainer.hpp"

namespace scsco {
namespace {

constexpr double kPrimitiveTol = 1e-4;
constexpr double kEndToEndTol = 1e-3;
// Deep cases cross many ReLU/abs kinks; a small step keeps every probe on
// one side of them while double precision keeps round-off negligible.
constexpr double kDeepStep = 1e-6;

using Vars = std::vector<Var<double>>;

std::uint64_t name_seed(const std::string& name) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : name) h = (h ^ c) * 1099511628211ULL;
  return h;
}

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  TensorD normal(Shape s, double sd = 1.0) {
    std::normal_distribution<double> d(0.0, sd);
    TensorD t(s);
    for (double& v : t.data()) v = d(rng_);
    return t;
  }
  TensorD uniform(Shape s, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    TensorD t(s);
    for (double& v : t.data()) v = d(rng_);
    return t;
  }
  // Random sign, magnitude in [lo, hi]: keeps kinks at zero out of reach.
  TensorD away(Shape s, double lo, double hi) {
    TensorD t = uniform(s, lo, hi);
    std::bernoulli_distribution flip(0.5);
    for (double& v : t.data())
      if (flip(rng_)) v = -v;
    return t;
  }
  // Rows of a [1,1,r,c] matrix that are positive and sum to one.
  TensorD stochastic(int rows, int cols) {
    TensorD t = uniform({1, 1, rows, cols}, 0.1, 1.0);
    for (int r = 0; r < rows; ++r) {
      double s = 0;
      for (int c = 0; c < cols; ++c) s += t(r, c);
      for (int c = 0; c < cols; ++c) t(r, c) /= s;
    }
    return t;
  }

 private:
  std::mt19937_64 rng_;
};

GradInput wrt(TensorD v) { return {std::move(v), true}; }
GradInput fixed(TensorD v) { return {std::move(v), false}; }

GradCheckOptions options(const std::string& name, double tol, double h = 1e-5,
                         std::size_t probes = 512) {
  GradCheckOptions o;
  o.tol = tol;
  o.h = h;
  o.max_probes = probes;
  o.seed = name_seed(name) ^ 0x9e37;
  return o;
}

// Binary rectangle mask on an h x w grid.
TensorD rect_mask(int h, int w, int y0, int y1, int x0, int x1) {
  TensorD m({1, 1, h, w});
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) m[static_cast<std::size_t>(y) * w + x] = 1.0;
  return m;
}

// Soft foreground weights in [0, 1] with some exact 0 and 1 cells, as the
// pooled mask at a bottleneck looks.
TensorD soft_mask(int h, int w, Gen& g) {
  TensorD m = g.uniform({1, 1, h, w}, 0.05, 0.95);
  m[0] = 1.0;
  m[1] = 0.0;
  m[m.size() - 1] = 1.0;
  return m;
}

Var<double> pair_out(Var<double> a, Var<double> b) { return concat_channels(a, b); }

class Registry {
 public:
  template <typename Build>
  void add(const std::string& scope, const std::string& name, Build build) {
    cases_.push_back({scope, name, [name, build] { return build(name); }});
  }
  std::vector<GradCase> take() { return std::move(cases_); }

 private:
  std::vector<GradCase> cases_;
};

// One elementwise or shape op checked on a single input.
template <typename Op>
GradCheckReport unary(const std::string& name, TensorD x, Op op) {
  return grad_check(
      name, [op](Tape<double>&, const Vars& v) { return op(v[0]); }, {wrt(std::move(x))},
      options(name, kPrimitiveTol));
}

void tensor_cases(Registry& r) {
  const Shape s{2, 3, 4, 5};
  r.add("tensor", "add", [s](const std::string& n) {
    Gen g(name_seed(n));
    return grad_check(n, [](Tape<double>&, const Vars& v) { return add(v[0], v[1]); },
                      {wrt(g.normal(s)), wrt(g.normal(s))}, options(n, kPrimitiveTol));
  });
  r.add("tensor", "sub", [s](const std::string& n) {
    Gen g(name_seed(n));
    return grad_check(n, [](Tape<double>&, const Vars& v) { return sub(v[0], v[1]); },
                      {wrt(g.normal(s)), wrt(g.normal(s))}, options(n, kPrimitiveTol));
  });
  r.add("tensor", "mul", [s](const std::string& n) {
    Gen g(name_seed(n));
    return grad_check(n, [](Tape<double>&, const Vars& v) { return mul(v[0], v[1]); },
                      {wrt(g.normal(s)), wrt(g.normal(s))}, options(n, kPrimitiveTol));
  });
  r.add("tensor", "div", [s](const std::string& n) {
    Gen g(name_seed(n));
    return grad_check(n, [](Tape<double>&, const Vars& v) { return div(v[0], v[1]); },
                      {wrt(g.normal(s)), wrt(g.away(s, 0.5, 2.0))}, options(n, kPrimitiveTol));
  });
  r.add("tensor", "scale", [s](const std::string& n) {
    Gen g(name_seed(n));
    return unary(n, g.normal(s), [](Var<double> x) { return scale(x, -1.7); });
  });
  r.add("tensor", "add_scalar", [s](const std::string& n) {
    Gen g(name_seed(n));
    return unary(n, g.normal(s), [](Var<double> x) { return add_scalar(x, 0.3); });
  });
  r.add("tensor", "one_minus", [s](const std::string& n) {
    Gen g(name_seed(n));
    return unary(n, g.normal(s), [](Var<double> x) { return one_minus(x); });
  });
  r.add("tensor", "relu", [s](const std::string& n) {
    Gen g(name_seed(n));
    return unary(n, g.away(s, 0.05, 1.0), [](Var<double> x) { return relu(x); });
  });
  r.add("tensor", "leaky_relu", [s](const std::string& n) {
    Gen g(name_seed(n));
    return unary(n, g.away(s, 0.05, 1.0), [](Var<double> x) { return leaky_relu(x, 0.2); });
  });
  r.add("tensor", "sigmoid", [s](const std::string& n) {
    Gen g(name_seed(n));
    return unary(n, g.normal(s, 2.0), [](Var<double> x) { return sigmoid(x); });
  });
  r.add("tensor", "sqrt", [s](const std::string& n) {
    Gen g(name_seed(n));
    return unary(n, g.uniform(s, 0.2, 2.0), [](Var<double> x) { return sqrt(x); });
  });
  r.add("tensor", "abs", [s](const std::string& n) {
    Gen g(name_seed(n));
    return unary(n, g.away(s, 0.05, 1.0), [](Var<double> x) { return abs(x); });
  });
  r.add("tensor", "square", [s](const std::string& n) {
    Gen g(name_seed(n));
    return unary(n, g.normal(s), [](Var<double> x) { return square(x); });
  });
  r.add("tensor", "sum", [s](const std::string& n) {
    Gen g(name_seed(n));
    return unary(n, g.normal(s), [](Var<double> x) { return sum(x); });
  });
  r.add("tensor", "mean", [s](const std::string& n) {
    Gen g(name_seed(n));
    return unary(n, g.normal(s), [](Var<double> x) { return mean(x); });
  });
  r.add("tensor", "reshape", [s](const std::string& n) {
    Gen g(name_seed(n));
    return unary(n, g.normal(s), [](Var<double> x) { return reshape(x, Shape{1, 1, 6, 20}); });
  });
  r.add("tensor", "transpose", [](const std::string& n) {
    Gen g(name_seed(n));
    return unary(n, g.normal({1, 1, 5, 7}), [](Var<double> x) { return transpose(x); });
  });
  r.add("tensor", "concat_channels", [](const std::string& n) {
    Gen g(name_seed(n));
    return grad_check(
        n, [](Tape<double>&, const Vars& v) { return concat_channels(v[0], v[1]); },
        {wrt(g.normal({1, 2, 3, 3})), wrt(g.normal({1, 3, 3, 3}))}, options(n, kPrimitiveTol));
  });
  r.add("tensor", "upsample_nearest", [](const std::string& n) {
    Gen g(name_seed(n));
    return unary(n, g.normal({1, 2, 3, 4}), [](Var<double> x) { return upsample_nearest(x, 2); });
  });
  struct ConvSpec {
    const char* name;
    Shape x;
    int co, k, stride, pad;
  };
  for (const ConvSpec& c : {ConvSpec{"conv2d_3x3_s1", {1, 3, 6, 5}, 4, 3, 1, 1},
                            ConvSpec{"conv2d_3x3_s2", {1, 3, 8, 8}, 4, 3, 2, 1},
                            ConvSpec{"conv2d_1x1", {1, 5, 4, 4}, 2, 1, 1, 0}}) {
    r.add("tensor", c.name, [c](const std::string& n) {
      Gen g(name_seed(n));
      const int stride = c.stride, pad = c.pad;
      return grad_check(
          n,
          [stride, pad](Tape<double>&, const Vars& v) {
            return conv2d(v[0], v[1], v[2], stride, pad);
          },
          {wrt(g.normal(c.x)), wrt(g.normal({c.co, c.x.c, c.k, c.k}, 0.5)),
           wrt(g.normal({1, c.co, 1, 1}))},
          options(n, kPrimitiveTol));
    });
  }
  r.add("tensor", "matmul", [](const std::string& n) {
    Gen g(name_seed(n));
    return grad_check(n, [](Tape<double>&, const Vars& v) { return matmul(v[0], v[1]); },
                      {wrt(g.normal({1, 1, 4, 6})), wrt(g.normal({1, 1, 6, 3}))},
                      options(n, kPrimitiveTol));
  });
  r.add("tensor", "softmax_rows", [](const std::string& n) {
    Gen g(name_seed(n));
    TensorD mask({1, 1, 5, 6});
    for (int row = 0; row < 5; ++row) {
      mask(row, 1) = kMaskedLogit;
      mask(row, 4) = kMaskedLogit;
    }
    return grad_check(
        n, [mask](Tape<double>&, const Vars& v) { return softmax_rows(v[0], mask); },
        {wrt(g.normal({1, 1, 5, 6}, 2.0))}, options(n, kPrimitiveTol));
  });
  r.add("tensor", "weighted_channel_moments", [](const std::string& n) {
    Gen g(name_seed(n));
    return grad_check(
        n,
        [](Tape<double>&, const Vars& v) {
          const Moments<double> m = weighted_channel_moments(v[0], v[1]);
          return pair_out(m.mu, m.sigma);
        },
        {wrt(g.normal({2, 3, 4, 5})), wrt(g.uniform({2, 1, 4, 5}, 0.1, 1.0))},
        options(n, kPrimitiveTol));
  });
  r.add("tensor", "avgpool_mask", [](const std::string& n) {
    Gen g(name_seed(n));
    return unary(n, g.uniform({1, 1, 8, 8}, 0.0, 1.0),
                 [](Var<double> x) { return avgpool_mask(x, 4); });
  });
  r.add("tensor", "mul_mask", [](const std::string& n) {
    Gen g(name_seed(n));
    return grad_check(n, [](Tape<double>&, const Vars& v) { return mul_mask(v[0], v[1]); },
                      {wrt(g.normal({2, 3, 4, 4})), wrt(g.uniform({2, 1, 4, 4}, 0.0, 1.0))},
                      options(n, kPrimitiveTol));
  });
  r.add("tensor", "normalize_channels", [](const std::string& n) {
    Gen g(name_seed(n));
    return grad_check(
        n, [](Tape<double>&, const Vars& v) { return normalize_channels(v[0], v[1], v[2]); },
        {wrt(g.normal({1, 3, 4, 4})), wrt(g.normal({1, 3, 1, 1})),
         wrt(g.uniform({1, 3, 1, 1}, 0.5, 2.0))},
        options(n, kPrimitiveTol));
  });
  r.add("tensor", "channel_affine", [](const std::string& n) {
    Gen g(name_seed(n));
    return grad_check(
        n, [](Tape<double>&, const Vars& v) { return channel_affine(v[0], v[1], v[2]); },
        {wrt(g.normal({1, 3, 4, 4})), wrt(g.normal({1, 3, 1, 1})), wrt(g.normal({1, 3, 1, 1}))},
        options(n, kPrimitiveTol));
  });
}

// Features [1, c, h, w] plus the six projection tensors of a BAIN layer.
std::vector<GradInput> bain_inputs(Gen& g, int c, int h, int w) {
  const int cq = bain_query_channels(c);
  return {wrt(g.normal({1, c, h, w})),
          wrt(g.normal({cq, c, 1, 1}, 1.0 / std::sqrt(c))),
          wrt(g.normal({1, cq, 1, 1}, 0.1)),
          wrt(g.normal({cq, c, 1, 1}, 1.0 / std::sqrt(c))),
          wrt(g.normal({1, cq, 1, 1}, 0.1)),
          wrt(g.normal({c, c, 1, 1}, 1.0 / std::sqrt(c))),
          wrt(g.normal({1, c, 1, 1}, 0.1))};
}

BainParams<double> bain_params(const Vars& v, std::size_t first) {
  return {v[first], v[first + 1], v[first + 2], v[first + 3], v[first + 4], v[first + 5]};
}

void bain_cases(Registry& r) {
  r.add("bain", "separate_regions", [](const std::string& n) {
    Gen g(name_seed(n));
    return grad_check(
        n,
        [](Tape<double>&, const Vars& v) {
          const RegionPair<double> p = separate_regions(v[0], v[1]);
          return pair_out(p.foreground, p.background);
        },
        {wrt(g.normal({1, 4, 3, 5})), wrt(soft_mask(3, 5, g))}, options(n, kPrimitiveTol));
  });
  r.add("bain", "region_instance_norm", [](const std::string& n) {
    Gen g(name_seed(n));
    return grad_check(
        n,
        [](Tape<double>&, const Vars& v) { return region_instance_norm(v[0], v[1]).normalized; },
        {wrt(g.normal({1, 4, 3, 5})), wrt(soft_mask(3, 5, g))}, options(n, kPrimitiveTol));
  });
  r.add("bain", "attention_map", [](const std::string& n) {
    Gen g(name_seed(n));
    const int c = 16, h = 3, w = 4;
    std::vector<GradInput> in = bain_inputs(g, c, h, w);
    in.insert(in.begin() + 1, wrt(g.normal({1, c, h, w})));  // background features
    in.insert(in.begin() + 2, fixed(soft_mask(h, w, g)));
    return grad_check(
        n,
        [](Tape<double>&, const Vars& v) {
          return attention_map(v[0], v[1], v[2], bain_params(v, 3));
        },
        in, options(n, kPrimitiveTol));
  });
  r.add("bain", "attention_weighted_moments", [](const std::string& n) {
    Gen g(name_seed(n));
    return grad_check(
        n,
        [](Tape<double>&, const Vars& v) {
          const AttentionMoments<double> m = attention_weighted_moments(v[0], v[1]);
          return pair_out(m.expectation, m.stddev);
        },
        {wrt(g.stochastic(12, 12)), wrt(g.normal({1, 1, 5, 12}))}, options(n, kPrimitiveTol));
  });
  r.add("bain", "bain_forward", [](const std::string& n) {
    Gen g(name_seed(n));
    const int c = 16, h = 4, w = 4;
    std::vector<GradInput> in = bain_inputs(g, c, h, w);
    in.insert(in.begin() + 1, fixed(soft_mask(h, w, g)));
    return grad_check(
        n,
        [](Tape<double>&, const Vars& v) {
          return bain_forward(v[0], v[1], bain_params(v, 2)).feature;
        },
        in, options(n, kPrimitiveTol));
  });
  r.add("bain", "rain_forward", [](const std::string& n) {
    Gen g(name_seed(n));
    return grad_check(n, [](Tape<double>&, const Vars& v) { return rain_forward(v[0], v[1]); },
                      {wrt(g.normal({1, 6, 4, 4})), fixed(soft_mask(4, 4, g))},
                      options(n, kPrimitiveTol));
  });
  r.add("bain", "adain_forward", [](const std::string& n) {
    Gen g(name_seed(n));
    return grad_check(n, [](Tape<double>&, const Vars& v) { return adain_forward(v[0], v[1]); },
                      {wrt(g.normal({1, 4, 3, 4})), wrt(g.normal({1, 4, 5, 3}))},
                      options(n, kPrimitiveTol));
  });
}

StyleRep<double> rep(Var<double> feat) { return {feat, 1.0}; }
ConsistencyRep<double> crep(Var<double> g) { return {g}; }

const StyleExtractor& shared_extractor() {
  static const StyleExtractor extractor = StyleExtractor::standin();
  return extractor;
}

Tensor to_float(const TensorD& t) { return t.cast<float>(); }

void loss_cases(Registry& r) {
  r.add("loss", "extract_style", [](const std::string& n) {
    Gen g(name_seed(n));
    const Tensor mask = to_float(rect_mask(16, 16, 0, 8, 0, 16));
    return grad_check(
        n,
        [mask](Tape<double>&, const Vars& v) {
          return extract_style(shared_extractor(), v[0], mask).feat;
        },
        {wrt(g.uniform({1, 3, 16, 16}, 0.0, 1.0))}, options(n, kPrimitiveTol, kDeepStep));
  });
  r.add("loss", "gram", [](const std::string& n) {
    Gen g(name_seed(n));
    return grad_check(
        n, [](Tape<double>&, const Vars& v) { return gram(rep(v[0]), rep(v[1])).gram; },
        {wrt(g.normal({1, 4, 3, 3})), wrt(g.normal({1, 4, 3, 3}))}, options(n, kPrimitiveTol));
  });
  r.add("loss", "style_distance_rep", [](const std::string& n) {
    Gen g(name_seed(n));
    const Shape s{1, 4, 3, 3};
    TensorD a = g.normal(s);
    TensorD b = a;
    TensorD gap = g.away(s, 0.05, 1.0);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += gap[i];
    return grad_check(
        n, [](Tape<double>&, const Vars& v) { return style_distance(rep(v[0]), rep(v[1])); },
        {wrt(a), wrt(b)}, options(n, kPrimitiveTol));
  });
  r.add("loss", "style_distance_gram", [](const std::string& n) {
    Gen g(name_seed(n));
    const Shape s{1, 1, 4, 4};
    TensorD a = g.normal(s);
    TensorD b = a;
    TensorD gap = g.away(s, 0.05, 1.0);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += gap[i];
    return grad_check(
        n, [](Tape<double>&, const Vars& v) { return style_distance(crep(v[0]), crep(v[1])); },
        {wrt(a), wrt(b)}, options(n, kPrimitiveTol));
  });
  r.add("loss", "ss_cr_loss", [](const std::string& n) {
    Gen g(name_seed(n));
    const Shape s{1, 4, 3, 3};
    std::vector<GradInput> in;
    for (int i = 0; i < 5; ++i) in.push_back(wrt(g.normal(s)));
    return grad_check(
        n,
        [](Tape<double>&, const Vars& v) {
          std::vector<StyleRep<double>> negs;
          for (std::size_t i = 2; i < v.size(); ++i) negs.push_back(rep(v[i]));
          return ss_cr_loss(rep(v[0]), rep(v[1]), negs);
        },
        in, options(n, kPrimitiveTol));
  });
  r.add("loss", "cs_cr_loss", [](const std::string& n) {
    Gen g(name_seed(n));
    const Shape s{1, 1, 4, 4};
    std::vector<GradInput> in;
    for (int i = 0; i < 5; ++i) in.push_back(wrt(g.normal(s)));
    return grad_check(
        n,
        [](Tape<double>&, const Vars& v) {
          std::vector<ConsistencyRep<double>> negs;
          for (std::size_t i = 2; i < v.size(); ++i) negs.push_back(crep(v[i]));
          return cs_cr_loss(crep(v[0]), crep(v[1]), negs);
        },
        in, options(n, kPrimitiveTol));
  });
  r.add("loss", "triplet_loss", [](const std::string& n) {
    Gen g(name_seed(n));
    const Shape s{1, 4, 3, 3};
    TensorD b = g.normal(s);
    TensorD f = g.normal(s, 3.0);  // far from b, so the hinge is active
    TensorD fp = b;
    TensorD gap = g.away(s, 0.05, 0.3);
    for (std::size_t i = 0; i < fp.size(); ++i) fp[i] += gap[i];
    return grad_check(
        n,
        [](Tape<double>&, const Vars& v) {
          return triplet_loss(rep(v[0]), rep(v[1]), rep(v[2]), 0.1);
        },
        {wrt(f), wrt(fp), wrt(b)}, options(n, kPrimitiveTol));
  });
  r.add("loss", "reconstruction_loss", [](const std::string& n) {
    Gen g(name_seed(n));
    const Shape s{1, 3, 6, 6};
    TensorD a = g.uniform(s, 0.0, 1.0);
    TensorD b = a;
    TensorD gap = g.away(s, 0.05, 0.3);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += gap[i];
    return grad_check(
        n, [](Tape<double>&, const Vars& v) { return reconstruction_loss(v[0], v[1]); },
        {wrt(a), wrt(b)}, options(n, kPrimitiveTol));
  });
  r.add("loss", "total_loss", [](const std::string& n) {
    Gen g(name_seed(n));
    const Shape s{1, 3, 16, 16};
    const Tensor mask = to_float(rect_mask(16, 16, 0, 8, 0, 8));
    const Tensor real = to_float(g.uniform(s, 0.0, 1.0));
    NegativeSet negs;
    for (int k = 0; k < 3; ++k) negs.negatives.push_back(to_float(g.uniform(s, 0.0, 1.0)));
    return grad_check(
        n,
        [=](Tape<double>&, const Vars& v) {
          return total_loss(v[0], real, negs, mask, shared_extractor(), 0.5).loss;
        },
        {wrt(g.uniform(s, 0.0, 1.0))}, options(n, kEndToEndTol, kDeepStep));
  });
}

// L_rec (or the full objective) through the harmonizer at 16 x 16, with
// respect to every parameter (subsampled) and the composite.
GradCheckReport net_case(const std::string& n, NormVariant norm, bool full_objective) {
  Gen g(name_seed(n));
  const int size = 16;
  const Shape s{1, 3, size, size};
  HarmonizerConfig config;
  config.norm = norm;
  const Harmonizer net(config);
  const BasicParamStore<double> params = net.init_params(name_seed(n)).cast<double>();
  const TensorD mask = rect_mask(size, size, 3, 11, 4, 13);
  const Tensor real = to_float(g.uniform(s, 0.0, 1.0));
  NegativeSet negs;
  for (int k = 0; k < 3; ++k) negs.negatives.push_back(to_float(g.uniform(s, 0.0, 1.0)));

  std::vector<GradInput> in;
  in.push_back(wrt(g.uniform(s, 0.0, 1.0)));
  in.push_back(fixed(mask));
  for (std::size_t i = 0; i < params.size(); ++i) in.push_back(wrt(params.tensor(i)));
  const Tensor maskf = to_float(mask);
  return grad_check(
      n,
      [=, &net](Tape<double>& tape, const Vars& v) {
        const BoundParams<double> bound(params, Vars(v.begin() + 2, v.end()));
        const Var<double> out = net.forward(bound, v[0], v[1]).harmonized;
        if (full_objective) return total_loss(out, real, negs, maskf, shared_extractor(), 0.5).loss;
        return reconstruction_loss(out, tape.constant(real.cast<double>()));
      },
      in, options(n, kEndToEndTol, kDeepStep, 384));
}

void net_cases(Registry& r) {
  r.add("net", "harmonizer_rec_bain",
        [](const std::string& n) { return net_case(n, NormVariant::kBain, false); });
  r.add("net", "harmonizer_rec_rain",
        [](const std::string& n) { return net_case(n, NormVariant::kRain, false); });
  r.add("net", "harmonizer_rec_none",
        [](const std::string& n) { return net_case(n, NormVariant::kNone, false); });
  r.add("net", "harmonizer_total_bain",
        [](const std::string& n) { return net_case(n, NormVariant::kBain, true); });
}

}  // namespace

const std::vector<std::string>& grad_scopes() {
  static const std::vector<std::string> scopes{"tensor", "bain", "loss", "net"};
  return scopes;
}

std::vector<GradCase> grad_cases(const std::string& scope) {
  Registry r;
  tensor_cases(r);
  bain_cases(r);
  loss_cases(r);
  net_cases(r);
  std::vector<GradCase> all = r.take();
  if (scope == "all") return all;
  bool known = false;
  for (const auto& s : grad_scopes()) known = known || s == scope;
  if (!known) {
    throw InvalidArgument("unknown gradcheck scope '" + scope +
                          "' (expected all, tensor, bain, loss or net)");
  }
  std::vector<GradCase> out;
  for (auto& c : all)
    if (c.scope == scope) out.push_back(std::move(c));
  return out;
}

GradSuiteResult run_grad_suite(const std::string& scope,
                               const std::function<void(const GradCheckReport&)>& on_report) {
  GradSuiteResult result;
  for (const GradCase& c : grad_cases(scope)) {
    GradCheckReport rep = c.run();
    rep.op = c.scope + "/" + c.name;
    result.pass = result.pass && rep.pass;
    if (on_report) on_report(rep);
    result.reports.push_back(std::move(rep));
  }
  return result;
}

}  // namespace scsco
