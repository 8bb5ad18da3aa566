#pragma once

#include <cstdint>
#include <vector>

#include "scsco/composites.hpp"
#include "scsco/params.hpp"

namespace scsco {

// Frozen convolutional feature network used as the style representation
// extractor. Layout in the weight store:
//   input.gain, input.shift   [1, 3, 1, 1]   applied as x * gain + shift
//   layer<i>.weight           [co, ci, 3, 3]
//   layer<i>.bias             [1, co, 1, 1]
//   layer<i>.stride           [1, 1, 1, 1]
// for i = 1..L; every layer is conv3x3 (pad 1) followed by ReLU.
// Any network with this layout (e.g. a converted pretrained one) can be loaded.
class StyleExtractor {
 public:
  explicit StyleExtractor(ParamStore weights);

  // Fixed-seed stand-in: channels 8, 16, 32, 32; strides 1, 2, 2, 2 (d = 8);
  // rows of each kernel matrix orthonormalised and scaled by sqrt(2).
  static StyleExtractor standin(std::uint64_t seed = 0x5c5c0);

  int downsample() const { return downsample_; }
  int channels() const { return channels_; }
  const ParamStore& weights() const { return weights_; }

  // Raw features of a [1, 3, h, w] image. Weights enter the tape as
  // constants; gradients reach `image` only.
  template <typename T>
  Var<T> features(Var<T> image) const;

 private:
  ParamStore weights_;
  BasicParamStore<double> weights_d_;
  std::vector<int> strides_;
  int downsample_ = 1;
  int channels_ = 0;
};

// Region-masked feature map.
template <typename T>
struct StyleRep {
  Var<T> feat;
  double region_weight = 0;
};

// Foreground/background style consistency (Gram of two representations).
template <typename T>
struct ConsistencyRep {
  Var<T> gram;
};

// Masks precomputed features with the mask pooled to feature resolution.
template <typename T>
StyleRep<T> mask_style(Var<T> features, const Tensor& mask, int downsample);

// extractor(image) * avgpool_mask(mask, d). Throws DegenerateRegion when the
// pooled region has no weight.
template <typename T>
StyleRep<T> extract_style(const StyleExtractor& extractor, Var<T> image, const Tensor& mask);

// Mean absolute difference over all entries.
template <typename T>
Var<T> style_distance(const StyleRep<T>& x, const StyleRep<T>& y);
template <typename T>
Var<T> style_distance(const ConsistencyRep<T>& x, const ConsistencyRep<T>& y);

// flat(f) flat(b)^T / (h' w').
template <typename T>
ConsistencyRep<T> gram(const StyleRep<T>& f, const StyleRep<T>& b);

inline constexpr double kEpsContrast = 1e-8;

// D(a, p) / (D(a, p) + sum_k D(a, n_k) + eps)
template <typename T>
Var<T> ss_cr_loss(const StyleRep<T>& anchor, const StyleRep<T>& positive,
                  const std::vector<StyleRep<T>>& negatives);
template <typename T>
Var<T> cs_cr_loss(const ConsistencyRep<T>& anchor, const ConsistencyRep<T>& positive,
                  const std::vector<ConsistencyRep<T>>& negatives);

// Representations of one training sample. b_pos is computed once and shared
// by every consistency term.
template <typename T>
struct StyleTerms {
  StyleRep<T> f;
  StyleRep<T> f_pos;
  StyleRep<T> b_pos;
  std::vector<StyleRep<T>> f_neg;
  ConsistencyRep<T> c;
  ConsistencyRep<T> c_pos;
  std::vector<ConsistencyRep<T>> c_neg;
};

// Only `harmonized` may carry gradient; real and negatives enter as constants.
template <typename T>
StyleTerms<T> style_terms(const StyleExtractor& extractor, Var<T> harmonized, const Tensor& real,
                          const NegativeSet& negatives, const Tensor& mask);

template <typename T>
struct TotalLoss {
  Var<T> loss;
  Var<T> rec;
  Var<T> ss;
  Var<T> cs;
};

// L_rec + lambda * (L_ss + L_cs).
template <typename T>
TotalLoss<T> total_loss(Var<T> harmonized, const Tensor& real, const NegativeSet& negatives,
                        const Tensor& mask, const StyleExtractor& extractor, double lambda);

}  // namespace scsco
