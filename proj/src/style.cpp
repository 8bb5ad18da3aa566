#include "scsco/style.hpp"

#include <cmath>
#include <random>

#include "scsco/harmonizer.hpp"

namespace scsco {
namespace {

// Row-orthonormal [rows, cols] matrix (rows <= cols) from Gaussian draws.
std::vector<double> orthonormal_rows(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> m(static_cast<std::size_t>(rows) * cols);
  for (auto& v : m) v = normal(rng);
  for (int r = 0; r < rows; ++r) {
    double* row = &m[static_cast<std::size_t>(r) * cols];
    for (int q = 0; q < r; ++q) {
      const double* prev = &m[static_cast<std::size_t>(q) * cols];
      double dot = 0;
      for (int j = 0; j < cols; ++j) dot += row[j] * prev[j];
      for (int j = 0; j < cols; ++j) row[j] -= dot * prev[j];
    }
    double norm = 0;
    for (int j = 0; j < cols; ++j) norm += row[j] * row[j];
    norm = std::sqrt(norm);
    for (int j = 0; j < cols; ++j) row[j] /= norm;
  }
  return m;
}

template <typename T>
const BasicParamStore<T>& store_for(const ParamStore& f, const BasicParamStore<double>& d) {
  if constexpr (std::is_same_v<T, float>) {
    (void)d;
    return f;
  } else {
    (void)f;
    return d;
  }
}

template <typename T>
Var<T> contrast_ratio(Var<T> positive_distance, const std::vector<Var<T>>& negative_distances) {
  if (negative_distances.empty()) throw InvalidArgument("contrastive loss needs >= 1 negative");
  Var<T> denom = positive_distance;
  for (const auto& d : negative_distances) denom = add(denom, d);
  return div(positive_distance, add_scalar(denom, kEpsContrast));
}

}  // namespace

StyleExtractor::StyleExtractor(ParamStore weights) : weights_(std::move(weights)) {
  check_shape(weights_.contains("input.gain") && weights_.contains("input.shift"),
              "style extractor: missing input.gain / input.shift");
  check_shape(weights_["input.gain"].shape() == Shape{1, 3, 1, 1} &&
                  weights_["input.shift"].shape() == Shape{1, 3, 1, 1},
              "style extractor: input.gain / input.shift must be [1,3,1,1]");
  int in_channels = 3;
  for (int i = 1;; ++i) {
    const std::string prefix = "layer" + std::to_string(i);
    if (!weights_.contains(prefix + ".weight")) break;
    const Shape w = weights_[prefix + ".weight"].shape();
    check_shape(w.c == in_channels && w.h == 3 && w.w == 3,
                "style extractor: " + prefix + ".weight has shape " + w.str());
    check_shape(weights_.contains(prefix + ".bias") &&
                    weights_[prefix + ".bias"].shape() == Shape{1, w.n, 1, 1},
                "style extractor: bad or missing " + prefix + ".bias");
    check_shape(weights_.contains(prefix + ".stride") &&
                    weights_[prefix + ".stride"].shape() == Shape{1, 1, 1, 1},
                "style extractor: bad or missing " + prefix + ".stride");
    const float s = weights_[prefix + ".stride"][0];
    check_shape(s >= 1 && s == std::floor(s), "style extractor: " + prefix + " stride invalid");
    strides_.push_back(static_cast<int>(s));
    downsample_ *= static_cast<int>(s);
    in_channels = w.n;
  }
  check_shape(!strides_.empty(), "style extractor: no layers");
  check_shape(weights_.size() == 2 + 3 * strides_.size(),
              "style extractor: unexpected extra tensors in weight store");
  channels_ = in_channels;
  weights_d_ = weights_.cast<double>();
}

StyleExtractor StyleExtractor::standin(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamStore w;
  w.add("input.gain", Tensor({1, 3, 1, 1}, 1.0f));
  w.add("input.shift", Tensor({1, 3, 1, 1}, -0.5f));
  const int channels[] = {8, 16, 32, 32};
  const int strides[] = {1, 2, 2, 2};
  int ci = 3;
  for (int i = 0; i < 4; ++i) {
    const int co = channels[i];
    const int fan_in = ci * 9;
    const auto rows = orthonormal_rows(co, fan_in, rng);
    Tensor kernel({co, ci, 3, 3});
    for (std::size_t k = 0; k < kernel.size(); ++k) {
      kernel[k] = static_cast<float>(rows[k] * std::sqrt(2.0));
    }
    const std::string prefix = "layer" + std::to_string(i + 1);
    w.add(prefix + ".weight", std::move(kernel));
    w.add(prefix + ".bias", Tensor({1, co, 1, 1}));
    w.add(prefix + ".stride", Tensor({1, 1, 1, 1}, static_cast<float>(strides[i])));
    ci = co;
  }
  return StyleExtractor(std::move(w));
}

template <typename T>
Var<T> StyleExtractor::features(Var<T> image) const {
  check_shape(image.shape().n == 1 && image.shape().c == 3,
              "style extractor expects a [1,3,h,w] image, got " + image.shape().str());
  const auto& w = store_for<T>(weights_, weights_d_);
  Tape<T>& tape = *image.tape;
  Var<T> x = channel_affine(image, tape.constant(w["input.gain"]), tape.constant(w["input.shift"]));
  for (std::size_t i = 0; i < strides_.size(); ++i) {
    const std::string prefix = "layer" + std::to_string(i + 1);
    x = conv2d(x, tape.constant(w[prefix + ".weight"]), tape.constant(w[prefix + ".bias"]),
               strides_[i], 1);
    x = relu(x);
  }
  return x;
}

template <typename T>
StyleRep<T> mask_style(Var<T> features, const Tensor& mask, int downsample) {
  const Shape sf = features.shape();
  check_shape(mask.shape().n == 1 && mask.shape().c == 1,
              "mask_style: expected a [1,1,h,w] mask, got " + mask.shape().str());
  Tape<T>& tape = *features.tape;
  Var<T> pooled = avgpool_mask(tape.constant(mask.template cast<T>()), downsample);
  check_shape(pooled.shape() == Shape{1, 1, sf.h, sf.w},
              "mask_style: pooled mask " + pooled.shape().str() + " does not match features " +
                  sf.str());
  double weight = 0;
  for (T v : pooled.value().data()) weight += v;
  if (weight < kMinRegionWeight) {
    throw DegenerateRegion("extract_style: region is empty at feature resolution");
  }
  return {mul_mask(features, pooled), weight};
}

template <typename T>
StyleRep<T> extract_style(const StyleExtractor& extractor, Var<T> image, const Tensor& mask) {
  return mask_style(extractor.features(image), mask, extractor.downsample());
}

template <typename T>
Var<T> style_distance(const StyleRep<T>& x, const StyleRep<T>& y) {
  return mean(abs(sub(x.feat, y.feat)));
}

template <typename T>
Var<T> style_distance(const ConsistencyRep<T>& x, const ConsistencyRep<T>& y) {
  return mean(abs(sub(x.gram, y.gram)));
}

template <typename T>
ConsistencyRep<T> gram(const StyleRep<T>& f, const StyleRep<T>& b) {
  const Shape sf = f.feat.shape();
  check_shape(sf == b.feat.shape() && sf.n == 1,
              "gram: representations " + sf.str() + " and " + b.feat.shape().str() + " differ");
  const int positions = sf.h * sf.w;
  Var<T> ff = reshape(f.feat, {1, 1, sf.c, positions});
  Var<T> fb = reshape(b.feat, {1, 1, sf.c, positions});
  return {scale(matmul(ff, transpose(fb)), 1.0 / positions)};
}

template <typename T>
Var<T> ss_cr_loss(const StyleRep<T>& anchor, const StyleRep<T>& positive,
                  const std::vector<StyleRep<T>>& negatives) {
  if (negatives.empty()) throw InvalidArgument("ss_cr_loss: empty negative list");
  std::vector<Var<T>> d;
  for (const auto& n : negatives) d.push_back(style_distance(anchor, n));
  return contrast_ratio(style_distance(anchor, positive), d);
}

template <typename T>
Var<T> cs_cr_loss(const ConsistencyRep<T>& anchor, const ConsistencyRep<T>& positive,
                  const std::vector<ConsistencyRep<T>>& negatives) {
  if (negatives.empty()) throw InvalidArgument("cs_cr_loss: empty negative list");
  std::vector<Var<T>> d;
  for (const auto& n : negatives) d.push_back(style_distance(anchor, n));
  return contrast_ratio(style_distance(anchor, positive), d);
}

template <typename T>
StyleTerms<T> style_terms(const StyleExtractor& extractor, Var<T> harmonized, const Tensor& real,
                          const NegativeSet& negatives, const Tensor& mask) {
  if (negatives.negatives.empty()) throw InvalidArgument("style_terms: empty negative set");
  Tape<T>& tape = *harmonized.tape;
  const int d = extractor.downsample();
  const Tensor background = [&] {
    Tensor inv(mask.shape());
    for (std::size_t i = 0; i < mask.size(); ++i) inv[i] = 1.0f - mask[i];
    return inv;
  }();

  StyleTerms<T> terms;
  terms.f = extract_style(extractor, harmonized, mask);
  const Var<T> real_features = extractor.features(tape.constant(real.template cast<T>()));
  terms.f_pos = mask_style(real_features, mask, d);
  terms.b_pos = mask_style(real_features, background, d);
  for (const Tensor& neg : negatives.negatives) {
    terms.f_neg.push_back(extract_style(extractor, tape.constant(neg.template cast<T>()), mask));
  }
  terms.c = gram(terms.f, terms.b_pos);
  terms.c_pos = gram(terms.f_pos, terms.b_pos);
  for (const auto& fn : terms.f_neg) terms.c_neg.push_back(gram(fn, terms.b_pos));
  return terms;
}

template <typename T>
TotalLoss<T> total_loss(Var<T> harmonized, const Tensor& real, const NegativeSet& negatives,
                        const Tensor& mask, const StyleExtractor& extractor, double lambda) {
  if (!(lambda >= 0)) throw InvalidArgument("total_loss: lambda must be >= 0");
  Tape<T>& tape = *harmonized.tape;
  TotalLoss<T> out;
  out.rec = reconstruction_loss(harmonized, tape.constant(real.template cast<T>()));
  const StyleTerms<T> terms = style_terms(extractor, harmonized, real, negatives, mask);
  out.ss = ss_cr_loss(terms.f, terms.f_pos, terms.f_neg);
  out.cs = cs_cr_loss(terms.c, terms.c_pos, terms.c_neg);
  out.loss = add(out.rec, scale(add(out.ss, out.cs), lambda));
  return out;
}

#define SCSCO_INSTANTIATE_STYLE(T)                                                             \
  template Var<T> StyleExtractor::features(Var<T>) const;                                      \
  template StyleRep<T> mask_style(Var<T>, const Tensor&, int);                                 \
  template StyleRep<T> extract_style(const StyleExtractor&, Var<T>, const Tensor&);            \
  template Var<T> style_distance(const StyleRep<T>&, const StyleRep<T>&);                      \
  template Var<T> style_distance(const ConsistencyRep<T>&, const ConsistencyRep<T>&);          \
  template ConsistencyRep<T> gram(const StyleRep<T>&, const StyleRep<T>&);                     \
  template Var<T> ss_cr_loss(const StyleRep<T>&, const StyleRep<T>&,                           \
                             const std::vector<StyleRep<T>>&);                                 \
  template Var<T> cs_cr_loss(const ConsistencyRep<T>&, const ConsistencyRep<T>&,               \
                             const std::vector<ConsistencyRep<T>>&);                           \
  template StyleTerms<T> style_terms(const StyleExtractor&, Var<T>, const Tensor&,             \
                                     const NegativeSet&, const Tensor&);                       \
  template TotalLoss<T> total_loss(Var<T>, const Tensor&, const NegativeSet&, const Tensor&,   \
                                   const StyleExtractor&, double);

SCSCO_INSTANTIATE_STYLE(float)
SCSCO_INSTANTIATE_STYLE(double)

}  // namespace scsco
