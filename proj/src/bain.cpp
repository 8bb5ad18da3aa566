#include "scsco/bain.hpp"

namespace scsco {
namespace {

template <typename T>
double weight_sum(const BasicTensor<T>& mask) {
  double s = 0;
  for (T v : mask.data()) s += v;
  return s;
}

template <typename T>
Var<T> blend(Var<T> aligned, Var<T> original, Var<T> mask) {
  return add(mul_mask(aligned, mask), mul_mask(original, one_minus(mask)));
}

}  // namespace

template <typename T>
RegionPair<T> separate_regions(Var<T> features, Var<T> mask) {
  return {mul_mask(features, mask), mul_mask(features, one_minus(mask))};
}

template <typename T>
NormalizedRegion<T> region_instance_norm(Var<T> features, Var<T> weights) {
  const Moments<T> m = weighted_channel_moments(features, weights);
  return {normalize_channels(features, m.mu, m.sigma), m.mu, m.sigma};
}

template <typename T>
BasicTensor<T> background_logit_mask(const BasicTensor<T>& mask) {
  const std::size_t hw = mask.shape().plane();
  check_shape(mask.shape().n == 1 && mask.shape().c == 1,
              "background_logit_mask: expected a [1,1,h,w] mask, got " + mask.shape().str());
  BasicTensor<T> out({1, 1, static_cast<int>(hw), static_cast<int>(hw)});
  bool any = false;
  std::vector<T> col(hw);
  for (std::size_t j = 0; j < hw; ++j) {
    const bool open = (T(1) - mask[j]) >= T(kMinRegionWeight);
    col[j] = open ? T(0) : T(kMaskedLogit);
    any = any || open;
  }
  if (!any) throw DegenerateRegion("attention: background region is empty at feature resolution");
  for (std::size_t i = 0; i < hw; ++i)
    for (std::size_t j = 0; j < hw; ++j) out[i * hw + j] = col[j];
  return out;
}

template <typename T>
Var<T> attention_map(Var<T> normalized_fg, Var<T> normalized_bg, Var<T> mask,
                     const BainParams<T>& params) {
  const Shape s = normalized_fg.shape();
  check_shape(s.n == 1, "attention_map: expects one sample, got " + s.str());
  check_shape(normalized_bg.shape() == s, "attention_map: region shapes differ");
  check_shape(mask.shape() == Shape{1, 1, s.h, s.w},
              "attention_map: mask " + mask.shape().str() + " does not match " + s.str());
  const BasicTensor<T> logit_mask = background_logit_mask(mask.value());
  const int hw = static_cast<int>(s.plane());
  Var<T> q = conv2d(normalized_fg, params.query_weight, params.query_bias, 1, 0);
  Var<T> k = conv2d(normalized_bg, params.key_weight, params.key_bias, 1, 0);
  const int cq = q.shape().c;
  q = reshape(q, {1, 1, cq, hw});
  k = reshape(k, {1, 1, cq, hw});
  return softmax_rows(matmul(transpose(q), k), logit_mask);
}

template <typename T>
AttentionMoments<T> attention_weighted_moments(Var<T> attention, Var<T> values) {
  const Shape sa = attention.shape();
  const Shape sv = values.shape();
  check_shape(sa.n == 1 && sa.c == 1 && sa.h == sa.w,
              "attention_weighted_moments: attention must be square, got " + sa.str());
  check_shape(sv.n == 1 && sv.c == 1 && sv.w == sa.w,
              "attention_weighted_moments: values " + sv.str() + " do not match attention " +
                  sa.str());
  Var<T> at = transpose(attention);
  Var<T> e = matmul(values, at);
  Var<T> second = matmul(square(values), at);
  Var<T> var = relu(sub(second, square(e)));
  return {e, sqrt(add_scalar(var, kEpsVariance))};
}

template <typename T>
BainOutput<T> bain_forward(Var<T> features, Var<T> mask, const BainParams<T>& params) {
  const Shape s = features.shape();
  check_shape(s.n == 1, "bain_forward: expects one sample, got " + s.str());
  check_shape(mask.shape() == Shape{1, 1, s.h, s.w},
              "bain_forward: mask " + mask.shape().str() + " does not match " + s.str());
  BainOutput<T> out;
  if (weight_sum(mask.value()) < kMinRegionWeight) {
    out.feature = features;
    out.passthrough = true;
    return out;
  }
  const int hw = static_cast<int>(s.plane());
  Var<T> bg_mask = one_minus(mask);
  const RegionPair<T> regions = separate_regions(features, mask);
  const NormalizedRegion<T> fg = region_instance_norm(regions.foreground, mask);
  const NormalizedRegion<T> bg = region_instance_norm(regions.background, bg_mask);

  out.attention = attention_map(fg.normalized, bg.normalized, mask, params);
  Var<T> v = conv2d(regions.background, params.value_weight, params.value_bias, 1, 0);
  v = reshape(v, {1, 1, s.c, hw});
  const AttentionMoments<T> stats = attention_weighted_moments(out.attention, v);
  out.expectation = stats.expectation;
  out.stddev = stats.stddev;

  Var<T> e = reshape(stats.expectation, s);
  Var<T> sd = reshape(stats.stddev, s);
  out.aligned = add(mul(sd, fg.normalized), e);
  out.feature = blend(out.aligned, features, mask);
  return out;
}

template <typename T>
Var<T> rain_forward(Var<T> features, Var<T> mask) {
  const Shape s = features.shape();
  check_shape(mask.shape() == Shape{s.n, 1, s.h, s.w},
              "rain_forward: mask " + mask.shape().str() + " does not match " + s.str());
  if (weight_sum(mask.value()) < kMinRegionWeight) return features;
  Var<T> bg_mask = one_minus(mask);
  const RegionPair<T> regions = separate_regions(features, mask);
  const NormalizedRegion<T> fg = region_instance_norm(regions.foreground, mask);
  const Moments<T> bg = weighted_channel_moments(regions.background, bg_mask);
  Var<T> aligned = channel_affine(fg.normalized, bg.sigma, bg.mu);
  return blend(aligned, features, mask);
}

template <typename T>
Var<T> adain_forward(Var<T> content, Var<T> style) {
  const Shape sc = content.shape();
  const Shape ss = style.shape();
  check_shape(sc.n == ss.n && sc.c == ss.c, "adain_forward: content " + sc.str() +
                                                " and style " + ss.str() + " differ in n or c");
  Tape<T>& tape = *content.tape;
  Var<T> ones_c = tape.constant(BasicTensor<T>({sc.n, 1, sc.h, sc.w}, T(1)));
  Var<T> ones_s = tape.constant(BasicTensor<T>({ss.n, 1, ss.h, ss.w}, T(1)));
  const NormalizedRegion<T> c = region_instance_norm(content, ones_c);
  const Moments<T> st = weighted_channel_moments(style, ones_s);
  return channel_affine(c.normalized, st.sigma, st.mu);
}

#define SCSCO_INSTANTIATE_BAIN(T)                                                       \
  template RegionPair<T> separate_regions(Var<T>, Var<T>);                              \
  template NormalizedRegion<T> region_instance_norm(Var<T>, Var<T>);                    \
  template BasicTensor<T> background_logit_mask(const BasicTensor<T>&);                 \
  template Var<T> attention_map(Var<T>, Var<T>, Var<T>, const BainParams<T>&);          \
  template AttentionMoments<T> attention_weighted_moments(Var<T>, Var<T>);              \
  template BainOutput<T> bain_forward(Var<T>, Var<T>, const BainParams<T>&);            \
  template Var<T> rain_forward(Var<T>, Var<T>);                                         \
  template Var<T> adain_forward(Var<T>, Var<T>);

SCSCO_INSTANTIATE_BAIN(float)
SCSCO_INSTANTIATE_BAIN(double)

}  // namespace scsco
