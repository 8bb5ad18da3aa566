#pragma once

#include <utility>
#include <vector>

#include "scsco/tape.hpp"

namespace scsco {

// Guard added under every standard-deviation square root.
inline constexpr double kEpsInstance = 1e-5;
// Additive logit for excluded softmax positions.
inline constexpr double kMaskedLogit = -1e9;

// Elementwise, same-shape operands.
template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> div(Var<T> a, Var<T> b);

template <typename T> Var<T> scale(Var<T> x, double s);
template <typename T> Var<T> add_scalar(Var<T> x, double s);
// 1 - x
template <typename T> Var<T> one_minus(Var<T> x);

template <typename T> Var<T> relu(Var<T> x);
template <typename T> Var<T> leaky_relu(Var<T> x, double slope);
template <typename T> Var<T> sigmoid(Var<T> x);
template <typename T> Var<T> sqrt(Var<T> x);
// Subgradient 0 at the origin.
template <typename T> Var<T> abs(Var<T> x);
template <typename T> Var<T> square(Var<T> x);

// Full reductions to a [1,1,1,1] scalar.
template <typename T> Var<T> sum(Var<T> x);
template <typename T> Var<T> mean(Var<T> x);

template <typename T> Var<T> reshape(Var<T> x, Shape shape);
// Matrix transpose of a [1,1,r,c] tensor.
template <typename T> Var<T> transpose(Var<T> x);

template <typename T> Var<T> concat_channels(Var<T> a, Var<T> b);
template <typename T> Var<T> upsample_nearest(Var<T> x, int factor);

// weight [co, ci, kh, kw], bias [1, co, 1, 1]. Each output accumulates
// bias, then input channels, kernel rows and kernel columns in ascending order.
template <typename T>
Var<T> conv2d(Var<T> input, Var<T> weight, Var<T> bias, int stride, int pad);

// [1,1,r,k] x [1,1,k,c]; each entry accumulates over k ascending.
template <typename T> Var<T> matmul(Var<T> a, Var<T> b);

// Row softmax of logits + additive_mask. Mask entries are 0 or kMaskedLogit.
template <typename T>
Var<T> softmax_rows(Var<T> logits, const BasicTensor<T>& additive_mask);

template <typename T>
struct Moments {
  Var<T> mu;     // [n, c, 1, 1]
  Var<T> sigma;  // [n, c, 1, 1]
};

// Per-sample, per-channel weighted mean and sqrt(weighted variance + eps).
// weights: [n, 1, h, w]; each sample's weight sum must be >= 1e-6.
template <typename T>
Moments<T> weighted_channel_moments(Var<T> features, Var<T> weights);

// Block mean of a single-channel map.
template <typename T> Var<T> avgpool_mask(Var<T> mask, int factor);

// x[n,c,h,w] * m[n,1,h,w], mask broadcast over channels.
template <typename T> Var<T> mul_mask(Var<T> x, Var<T> mask);

// (x - mu) / sigma with per-(n, c) statistics [n, c, 1, 1].
template <typename T> Var<T> normalize_channels(Var<T> x, Var<T> mu, Var<T> sigma);

// x * gain + shift with per-(n, c) coefficients [n, c, 1, 1].
template <typename T> Var<T> channel_affine(Var<T> x, Var<T> gain, Var<T> shift);

// Minimum weight sum accepted by weighted_channel_moments.
inline constexpr double kMinRegionWeight = 1e-6;

}  // namespace scsco
