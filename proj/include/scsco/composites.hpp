#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scsco/color.hpp"
#include "scsco/tensor.hpp"

namespace scsco {

// Images are [1, 3, h, w] in [0, 1]; masks are [1, 1, h, w] with entries in
// {0, 1} (1 = foreground).
struct Sample {
  Tensor composite;
  Tensor real;
  Tensor mask;
  std::string id;
};

// negatives[0] is always the input composite.
struct NegativeSet {
  std::vector<Tensor> negatives;
  int k() const { return static_cast<int>(negatives.size()); }
};

// Per-channel mean and population standard deviation in working Lab units.
struct RegionStats {
  Color3 mean{};
  Color3 stddev{};
};

// Foreground distortion applied by synth_composite: Lab mean shift drawn
// uniformly from [-max_shift, max_shift] and std scale from [scale_lo, scale_hi],
// independently per channel.
struct JitterSpec {
  double max_shift = 0.15;
  double scale_lo = 0.6;
  double scale_hi = 1.5;

  static JitterSpec none() { return {0.0, 1.0, 1.0}; }
};

// Validates a binary single-channel mask matching `image` spatially and
// returns its foreground pixel count.
std::size_t validate_mask(const Tensor& image, const Tensor& mask, const std::string& context);

// M * fg + (1 - M) * bg.
Tensor compose(const Tensor& fg, const Tensor& bg, const Tensor& mask);

RegionStats region_stats(const Tensor& image, const Tensor& mask);
RegionStats region_stats_lab(const Tensor& lab, const Tensor& mask);

// Lab-space transfer of the masked region: x -> (x - mu_dst) * s + mu_src with
// s = sigma_src / (sigma_dst + 1e-6). Returns unclamped Lab values; pixels
// outside the mask keep the input Lab values.
Tensor color_transfer_lab(const Tensor& lab, const Tensor& mask, const RegionStats& dst,
                          const RegionStats& src);

// color_transfer_lab applied to an sRGB image and clamped to [0, 1]; pixels
// outside the mask are copied bit-exactly from dst.
Tensor color_transfer(const Tensor& dst, const Tensor& mask, const RegionStats& src_stats);

// Lab (x - mu) * scale + mu + shift on the foreground, clamped to [0, 1];
// background copied bit-exactly.
Tensor perturb_foreground(const Tensor& real, const Tensor& mask, const Color3& shift,
                          const Color3& scale);

// Dynamic negatives: the composite, then K-1 copies of the real image whose
// foreground takes the color statistics of donors drawn from `batch`.
// Batch members with the sample's id are not eligible donors.
NegativeSet generate_negatives(const Sample& sample, std::span<const Sample> batch, int k,
                               std::uint64_t seed);

// Composite built from a real image by a random foreground color distortion.
Sample synth_composite(const Tensor& real, const Tensor& mask, const JitterSpec& jitter,
                       std::uint64_t seed, std::string id = {});

struct Scene {
  Tensor real;
  Tensor mask;
};

// Procedural "real" photograph: smooth shaded background and a textured
// elliptical object under one global illuminant, so the object's color
// statistics are predictable from its surroundings.
Scene synth_scene(int height, int width, std::uint64_t seed);

}  // namespace scsco
