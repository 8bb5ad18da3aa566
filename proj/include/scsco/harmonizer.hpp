#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "scsco/bain.hpp"
#include "scsco/params.hpp"

namespace scsco {

enum class NormVariant { kNone, kRain, kBain };

std::string to_string(NormVariant v);
NormVariant parse_norm_variant(const std::string& s);

struct HarmonizerConfig {
  NormVariant norm = NormVariant::kBain;
  std::array<int, 4> channels{16, 32, 64, 128};
  double leaky_slope = 0.2;
};

// Intermediate values exposed for inspection.
template <typename T>
struct HarmonizerTaps {
  Var<T> bottleneck;       // encoder output
  Var<T> normalized;       // after the bottleneck normalization
  Var<T> bottleneck_mask;  // mask pooled to the bottleneck grid
  std::optional<Var<T>> attention;
};

template <typename T>
struct HarmonizerOutput {
  Var<T> harmonized;
  Var<T> head;  // squashed 3-channel map before the background blend
  HarmonizerTaps<T> taps;
};

// Compact U-Net generator: four stride-2 encoder stages (LeakyReLU), an
// optional bottleneck normalization, four nearest-upsample + conv decoder
// stages with concatenated skips (ReLU), and a sigmoid head. The network sees
// concat(composite, mask) shifted by -0.5. The head only replaces the
// foreground: out = M * head + (1 - M) * composite.
class Harmonizer {
 public:
  explicit Harmonizer(HarmonizerConfig config = {});

  const HarmonizerConfig& config() const { return config_; }

  // Freshly initialised parameters (He-normal convolutions, zero biases).
  ParamStore init_params(std::uint64_t seed) const;

  // Shapes of every parameter, in store order, with zero values.
  ParamStore param_layout() const;
  std::size_t param_count() const { return param_layout().scalar_count(); }

  // composite [1,3,h,w] in [0,1], mask [1,1,h,w] binary; h, w divisible by 16.
  template <typename T>
  HarmonizerOutput<T> forward(const BoundParams<T>& params, Var<T> composite, Var<T> mask) const;

 private:
  HarmonizerConfig config_;
};

// Mean absolute difference between two same-shape images.
template <typename T>
Var<T> reconstruction_loss(Var<T> harmonized, Var<T> real);

// Runs the generator without recording gradients and returns the image.
Tensor harmonize(const Harmonizer& net, const ParamStore& params, const Tensor& composite,
                 const Tensor& mask);

}  // namespace scsco
