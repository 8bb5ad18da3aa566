#pragma once

#include <array>

#include "scsco/tensor.hpp"

namespace scsco {

// sRGB (D65) <-> CIE Lab. The working Lab space is scaled by 1/100 on every
// axis, so L lies in [0, 1] and a, b roughly in [-1, 1].
using Color3 = std::array<double, 3>;

Color3 srgb_to_lab(const Color3& rgb);
Color3 lab_to_srgb(const Color3& lab);

// Per-pixel conversion of [n, 3, h, w] images.
Tensor image_to_lab(const Tensor& rgb);
// Unclamped; callers clamp to [0, 1] where an image is required.
Tensor lab_to_image(const Tensor& lab);

}  // namespace scsco
