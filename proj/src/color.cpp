#include "scsco/color.hpp"

#include <cmath>

namespace scsco {
namespace {

// D65 reference white.
constexpr double kXn = 0.95047;
constexpr double kYn = 1.0;
constexpr double kZn = 1.08883;

constexpr double kDelta = 6.0 / 29.0;

double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double c) {
  if (c <= 0.0031308) return 12.92 * c;
  return 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

double lab_f(double t) {
  return t > kDelta * kDelta * kDelta ? std::cbrt(t) : t / (3 * kDelta * kDelta) + 4.0 / 29.0;
}

double lab_f_inv(double t) {
  return t > kDelta ? t * t * t : 3 * kDelta * kDelta * (t - 4.0 / 29.0);
}

void check_image(const Tensor& t, const char* what) {
  check_shape(t.shape().c == 3, std::string(what) + ": expected 3 channels, got " +
                                    t.shape().str());
}

}  // namespace

Color3 srgb_to_lab(const Color3& rgb) {
  const double r = srgb_to_linear(rgb[0]);
  const double g = srgb_to_linear(rgb[1]);
  const double b = srgb_to_linear(rgb[2]);
  const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
  const double fx = lab_f(x / kXn);
  const double fy = lab_f(y / kYn);
  const double fz = lab_f(z / kZn);
  return {(116 * fy - 16) / 100.0, 500 * (fx - fy) / 100.0, 200 * (fy - fz) / 100.0};
}

Color3 lab_to_srgb(const Color3& lab) {
  const double fy = (lab[0] * 100.0 + 16) / 116.0;
  const double fx = fy + lab[1] * 100.0 / 500.0;
  const double fz = fy - lab[2] * 100.0 / 200.0;
  const double x = kXn * lab_f_inv(fx);
  const double y = kYn * lab_f_inv(fy);
  const double z = kZn * lab_f_inv(fz);
  const double r = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
  const double g = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
  const double b = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;
  return {linear_to_srgb(r), linear_to_srgb(g), linear_to_srgb(b)};
}

Tensor image_to_lab(const Tensor& rgb) {
  check_image(rgb, "image_to_lab");
  Tensor out(rgb.shape());
  const std::size_t plane = rgb.shape().plane();
  for (int n = 0; n < rgb.shape().n; ++n) {
    const std::size_t base = static_cast<std::size_t>(n) * 3 * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      const Color3 lab =
          srgb_to_lab({rgb[base + p], rgb[base + plane + p], rgb[base + 2 * plane + p]});
      for (int c = 0; c < 3; ++c) out[base + c * plane + p] = static_cast<float>(lab[c]);
    }
  }
  return out;
}

Tensor lab_to_image(const Tensor& lab) {
  check_image(lab, "lab_to_image");
  Tensor out(lab.shape());
  const std::size_t plane = lab.shape().plane();
  for (int n = 0; n < lab.shape().n; ++n) {
    const std::size_t base = static_cast<std::size_t>(n) * 3 * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      const Color3 rgb =
          lab_to_srgb({lab[base + p], lab[base + plane + p], lab[base + 2 * plane + p]});
      for (int c = 0; c < 3; ++c) out[base + c * plane + p] = static_cast<float>(rgb[c]);
    }
  }
  return out;
}

}  // namespace scsco
