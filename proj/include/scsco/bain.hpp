#pragma once

#include "scsco/ops.hpp"

namespace scsco {

// Guard under the attention-weighted standard deviation.
inline constexpr double kEpsVariance = 1e-5;

// Query/key width of the attention projections.
constexpr int bain_query_channels(int channels) { return channels / 8 > 1 ? channels / 8 : 1; }

// 1x1 projections producing query, key and value. Weights are
// [cq, c, 1, 1] (query, key) and [c, c, 1, 1] (value); biases [1, co, 1, 1].
template <typename T>
struct BainParams {
  Var<T> query_weight, query_bias;
  Var<T> key_weight, key_bias;
  Var<T> value_weight, value_bias;
};

template <typename T>
struct RegionPair {
  Var<T> foreground;
  Var<T> background;
};

template <typename T>
struct NormalizedRegion {
  Var<T> normalized;
  Var<T> mu;
  Var<T> sigma;
};

template <typename T>
struct AttentionMoments {
  Var<T> expectation;  // [1, 1, c, HW]
  Var<T> stddev;       // [1, 1, c, HW]
};

template <typename T>
struct BainOutput {
  Var<T> feature;  // M * aligned + (1 - M) * F
  // Unset (tape == nullptr) when the foreground is empty and F passes through.
  Var<T> aligned;
  Var<T> attention;  // [1, 1, HW, HW]
  Var<T> expectation;
  Var<T> stddev;
  bool passthrough = false;
};

// F * M and F * (1 - M), mask broadcast over channels.
template <typename T>
RegionPair<T> separate_regions(Var<T> features, Var<T> mask);

// (F - mu) / sigma with moments weighted by `weights`, applied at every site.
template <typename T>
NormalizedRegion<T> region_instance_norm(Var<T> features, Var<T> weights);

// Additive softmax mask excluding key columns whose background weight
// (1 - M) is below 1e-6. Throws DegenerateRegion for an empty background.
template <typename T>
BasicTensor<T> background_logit_mask(const BasicTensor<T>& mask);

// Row-stochastic [HW, HW] attention between normalized foreground queries and
// normalized background keys. Expects a single sample (n == 1).
template <typename T>
Var<T> attention_map(Var<T> normalized_fg, Var<T> normalized_bg, Var<T> mask,
                     const BainParams<T>& params);

// E = V A^T and S = sqrt(max(0, (V*V) A^T - E*E) + eps) for V [1,1,c,HW].
template <typename T>
AttentionMoments<T> attention_weighted_moments(Var<T> attention, Var<T> values);

// Background-attentional adaptive instance normalization for one sample.
// mask is the foreground mask resized to the feature grid, entries in [0, 1].
template <typename T>
BainOutput<T> bain_forward(Var<T> features, Var<T> mask, const BainParams<T>& params);

// Region-aware baseline: align the foreground to global background moments.
template <typename T>
Var<T> rain_forward(Var<T> features, Var<T> mask);

// Plain AdaIN: content normalized by its own moments, re-styled with the
// style map's global moments.
template <typename T>
Var<T> adain_forward(Var<T> content, Var<T> style);

}  // namespace scsco
