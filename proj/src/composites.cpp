#include "scsco/composites.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace scsco {
namespace {

void check_image(const Tensor& t, const std::string& context) {
  check_shape(t.shape().n == 1 && t.shape().c == 3,
              context + ": expected a [1,3,h,w] image, got " + t.shape().str());
}

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

template <typename Fn>
Tensor map_foreground_lab(const Tensor& image, const Tensor& mask, Fn&& fn) {
  const std::size_t plane = image.shape().plane();
  Tensor out = image;
  for (std::size_t p = 0; p < plane; ++p) {
    if (mask[p] < 0.5f) continue;
    const Color3 lab = srgb_to_lab({image[p], image[plane + p], image[2 * plane + p]});
    const Color3 rgb = lab_to_srgb(fn(lab));
    for (int c = 0; c < 3; ++c) out[c * plane + p] = clamp01(rgb[c]);
  }
  return out;
}

}  // namespace

std::size_t validate_mask(const Tensor& image, const Tensor& mask, const std::string& context) {
  const Shape si = image.shape();
  check_shape(mask.shape() == Shape{si.n, 1, si.h, si.w},
              context + ": mask " + mask.shape().str() + " does not match image " + si.str());
  std::size_t count = 0;
  for (float v : mask.data()) {
    check_shape(v == 0.0f || v == 1.0f, context + ": mask is not binary");
    if (v == 1.0f) ++count;
  }
  return count;
}

Tensor compose(const Tensor& fg, const Tensor& bg, const Tensor& mask) {
  check_shape(fg.shape() == bg.shape(),
              "compose: foreground " + fg.shape().str() + " and background " + bg.shape().str() +
                  " differ");
  validate_mask(fg, mask, "compose");
  const Shape s = fg.shape();
  const std::size_t plane = s.plane();
  Tensor out(s);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (std::size_t p = 0; p < plane; ++p) {
        const std::size_t i = (static_cast<std::size_t>(n) * s.c + c) * plane + p;
        const float m = mask[n * plane + p];
        out[i] = m * fg[i] + (1.0f - m) * bg[i];
      }
  return out;
}

RegionStats region_stats_lab(const Tensor& lab, const Tensor& mask) {
  check_image(lab, "region_stats");
  const std::size_t count = validate_mask(lab, mask, "region_stats");
  if (count == 0) throw DegenerateRegion("region_stats: empty region");
  const std::size_t plane = lab.shape().plane();
  RegionStats st;
  for (int c = 0; c < 3; ++c) {
    double m = 0;
    for (std::size_t p = 0; p < plane; ++p)
      if (mask[p] == 1.0f) m += lab[c * plane + p];
    m /= static_cast<double>(count);
    double v = 0;
    for (std::size_t p = 0; p < plane; ++p)
      if (mask[p] == 1.0f) {
        const double d = lab[c * plane + p] - m;
        v += d * d;
      }
    st.mean[c] = m;
    st.stddev[c] = std::sqrt(v / static_cast<double>(count));
  }
  return st;
}

RegionStats region_stats(const Tensor& image, const Tensor& mask) {
  check_image(image, "region_stats");
  return region_stats_lab(image_to_lab(image), mask);
}

Tensor color_transfer_lab(const Tensor& lab, const Tensor& mask, const RegionStats& dst,
                          const RegionStats& src) {
  check_image(lab, "color_transfer");
  validate_mask(lab, mask, "color_transfer");
  const std::size_t plane = lab.shape().plane();
  Tensor out = lab;
  for (int c = 0; c < 3; ++c) {
    const double gain = src.stddev[c] / (dst.stddev[c] + 1e-6);
    for (std::size_t p = 0; p < plane; ++p) {
      if (mask[p] != 1.0f) continue;
      out[c * plane + p] =
          static_cast<float>((lab[c * plane + p] - dst.mean[c]) * gain + src.mean[c]);
    }
  }
  return out;
}

Tensor color_transfer(const Tensor& dst, const Tensor& mask, const RegionStats& src_stats) {
  check_image(dst, "color_transfer");
  for (double s : src_stats.stddev) {
    check_shape(s >= 0 && std::isfinite(s), "color_transfer: invalid source statistics");
  }
  const RegionStats own = region_stats(dst, mask);
  Color3 gain{};
  for (int c = 0; c < 3; ++c) gain[c] = src_stats.stddev[c] / (own.stddev[c] + 1e-6);
  return map_foreground_lab(dst, mask, [&](const Color3& lab) {
    Color3 out{};
    for (int c = 0; c < 3; ++c) out[c] = (lab[c] - own.mean[c]) * gain[c] + src_stats.mean[c];
    return out;
  });
}

Tensor perturb_foreground(const Tensor& real, const Tensor& mask, const Color3& shift,
                          const Color3& scale) {
  check_image(real, "perturb_foreground");
  const RegionStats own = region_stats(real, mask);
  return map_foreground_lab(real, mask, [&](const Color3& lab) {
    Color3 out{};
    for (int c = 0; c < 3; ++c) {
      out[c] = (lab[c] - own.mean[c]) * scale[c] + own.mean[c] + shift[c];
    }
    return out;
  });
}

NegativeSet generate_negatives(const Sample& sample, std::span<const Sample> batch, int k,
                               std::uint64_t seed) {
  if (k < 1) throw InvalidArgument("generate_negatives: K must be >= 1, got " + std::to_string(k));
  NegativeSet set;
  set.negatives.reserve(k);
  set.negatives.push_back(sample.composite);
  if (k == 1) return set;

  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].id != sample.id) others.push_back(i);
  }
  if (others.empty()) {
    throw InvalidArgument("generate_negatives: batch has no donor other than sample '" +
                          sample.id + "'");
  }
  const std::size_t need = static_cast<std::size_t>(k - 1);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> donors;
  if (others.size() >= need) {
    std::shuffle(others.begin(), others.end(), rng);
    donors.assign(others.begin(), others.begin() + need);
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
    for (std::size_t i = 0; i < need; ++i) donors.push_back(others[pick(rng)]);
  }
  for (std::size_t d : donors) {
    const Sample& donor = batch[d];
    set.negatives.push_back(
        color_transfer(sample.real, sample.mask, region_stats(donor.real, donor.mask)));
  }
  return set;
}

Sample synth_composite(const Tensor& real, const Tensor& mask, const JitterSpec& jitter,
                       std::uint64_t seed, std::string id) {
  check_image(real, "synth_composite");
  if (validate_mask(real, mask, "synth_composite") == 0) {
    throw DegenerateRegion("synth_composite: empty foreground");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Color3 shift{};
  Color3 gain{};
  for (int c = 0; c < 3; ++c) {
    shift[c] = (2 * unit(rng) - 1) * jitter.max_shift;
    gain[c] = jitter.scale_lo + (jitter.scale_hi - jitter.scale_lo) * unit(rng);
  }
  Sample s;
  s.real = real;
  s.mask = mask;
  s.composite = perturb_foreground(real, mask, shift, gain);
  s.id = std::move(id);
  return s;
}

Scene synth_scene(int height, int width, std::uint64_t seed) {
  check_shape(height >= 16 && width >= 16, "synth_scene: image must be at least 16x16");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  constexpr double kPi = std::numbers::pi;

  Color3 base{}, second{}, albedo{}, tint{};
  for (int c = 0; c < 3; ++c) {
    base[c] = uni(0.25, 0.75);
    second[c] = std::clamp(base[c] + uni(-0.08, 0.08), 0.05, 0.95);
    albedo[c] = std::clamp(base[c] + uni(-0.02, 0.02), 0.05, 0.95);
    tint[c] = uni(0.75, 1.2);
  }
  const double angle = uni(0, 2 * kPi);
  const double dx = std::cos(angle);
  const double dy = std::sin(angle);
  const double freq = uni(1.0, 3.0);
  const double phase = uni(0, 2 * kPi);
  const double tex_amp = uni(0.02, 0.06);

  const double cy = uni(0.3, 0.7) * height;
  const double cx = uni(0.3, 0.7) * width;
  const double ry = uni(0.18, 0.3) * height;
  const double rx = uni(0.18, 0.3) * width;
  const double obj_freq = uni(2.0, 4.0);

  Scene scene{Tensor({1, 3, height, width}), Tensor({1, 1, height, width})};
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = static_cast<double>(x) / width;
      const double v = static_cast<double>(y) / height;
      const double ey = (y - cy) / ry;
      const double ex = (x - cx) / rx;
      const double r2 = ex * ex + ey * ey;
      const bool inside = r2 <= 1.0;
      const std::size_t p = static_cast<std::size_t>(y) * width + x;
      scene.mask[p] = inside ? 1.0f : 0.0f;
      const double t = 0.5 + 0.5 * ((u - 0.5) * dx + (v - 0.5) * dy);
      const double tex = tex_amp * std::sin(2 * kPi * freq * (u * dy - v * dx) + phase);
      for (int c = 0; c < 3; ++c) {
        double value;
        if (inside) {
          // Lambert-like shading across the object plus a fine stripe pattern.
          const double shade = 1.05 - 0.25 * r2;
          value = albedo[c] * shade + 0.03 * std::sin(2 * kPi * obj_freq * (u + v));
        } else {
          value = base[c] * (1 - t) + second[c] * t + tex;
        }
        scene.real[c * plane + p] = clamp01(value * tint[c]);
      }
    }
  }
  return scene;
}

}  // namespace scsco
