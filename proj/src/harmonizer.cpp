#include "scsco/harmonizer.hpp"

#include <cmath>
#include <random>

#include "scsco/composites.hpp"

namespace scsco {
namespace {

constexpr int kStages = 4;
constexpr int kBottleneckFactor = 16;

void add_conv(ParamStore& store, const std::string& name, int co, int ci, int k) {
  store.add(name + ".weight", Tensor({co, ci, k, k}));
  store.add(name + ".bias", Tensor({1, co, 1, 1}));
}

template <typename T>
Var<T> conv(const BoundParams<T>& p, const std::string& name, Var<T> x, int stride, int pad) {
  return conv2d(x, p[name + ".weight"], p[name + ".bias"], stride, pad);
}

}  // namespace

std::string to_string(NormVariant v) {
  switch (v) {
    case NormVariant::kNone: return "none";
    case NormVariant::kRain: return "rain";
    case NormVariant::kBain: return "bain";
  }
  return "?";
}

NormVariant parse_norm_variant(const std::string& s) {
  if (s == "none") return NormVariant::kNone;
  if (s == "rain") return NormVariant::kRain;
  if (s == "bain") return NormVariant::kBain;
  throw InvalidArgument("unknown norm variant '" + s + "' (expected none, rain or bain)");
}

Harmonizer::Harmonizer(HarmonizerConfig config) : config_(config) {
  for (int c : config_.channels) check_shape(c >= 1, "harmonizer: channel counts must be >= 1");
}

ParamStore Harmonizer::param_layout() const {
  const auto& ch = config_.channels;
  ParamStore store;
  int in = 4;
  for (int i = 0; i < kStages; ++i) {
    add_conv(store, "enc" + std::to_string(i + 1), ch[i], in, 3);
    in = ch[i];
  }
  if (config_.norm == NormVariant::kBain) {
    const int c = ch[3];
    const int cq = bain_query_channels(c);
    add_conv(store, "bain.query", cq, c, 1);
    add_conv(store, "bain.key", cq, c, 1);
    add_conv(store, "bain.value", c, c, 1);
  }
  // Decoder stage i upsamples the deeper output and concatenates the skip at
  // its resolution (the encoder stage above it, or the network input).
  const std::array<int, 4> skip{4, ch[0], ch[1], ch[2]};
  const std::array<int, 4> out{ch[0], ch[0], ch[1], ch[2]};
  for (int i = kStages; i >= 1; --i) {
    const int deeper = i == kStages ? ch[3] : out[i];
    add_conv(store, "dec" + std::to_string(i), out[i - 1], deeper + skip[i - 1], 3);
  }
  add_conv(store, "head", 3, out[0], 3);
  return store;
}

ParamStore Harmonizer::init_params(std::uint64_t seed) const {
  ParamStore store = param_layout();
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < store.size(); ++i) {
    const std::string& name = store.name(i);
    Tensor& t = store.tensor(i);
    if (name.ends_with(".bias")) continue;
    const Shape s = t.shape();
    const double fan_in = static_cast<double>(s.c) * s.h * s.w;
    double stddev = std::sqrt(2.0 / fan_in);
    if (name.starts_with("bain.") || name.starts_with("head.")) stddev = std::sqrt(1.0 / fan_in);
    std::normal_distribution<double> normal(0.0, stddev);
    for (auto& v : t.data()) v = static_cast<float>(normal(rng));
  }
  return store;
}

template <typename T>
HarmonizerOutput<T> Harmonizer::forward(const BoundParams<T>& p, Var<T> composite,
                                        Var<T> mask) const {
  const Shape s = composite.shape();
  check_shape(s.n == 1 && s.c == 3, "harmonizer: expected a [1,3,h,w] composite, got " + s.str());
  check_shape(s.h % kBottleneckFactor == 0 && s.w % kBottleneckFactor == 0 && s.h > 0 && s.w > 0,
              "harmonizer: image dims " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                  " are not divisible by 16");
  check_shape(mask.shape() == Shape{1, 1, s.h, s.w},
              "harmonizer: mask " + mask.shape().str() + " does not match " + s.str());
  for (T v : mask.value().data()) {
    check_shape(v == T(0) || v == T(1), "harmonizer: mask is not binary");
  }

  HarmonizerOutput<T> out;
  const double slope = config_.leaky_slope;
  // Centred around zero; uncentred [0, 1] inputs train several times slower.
  Var<T> input = add_scalar(concat_channels(composite, mask), -0.5);
  std::array<Var<T>, kStages> enc;
  Var<T> x = input;
  for (int i = 0; i < kStages; ++i) {
    x = leaky_relu(conv(p, "enc" + std::to_string(i + 1), x, 2, 1), slope);
    enc[i] = x;
  }
  out.taps.bottleneck = x;
  out.taps.bottleneck_mask = avgpool_mask(mask, kBottleneckFactor);
  switch (config_.norm) {
    case NormVariant::kNone:
      break;
    case NormVariant::kRain:
      x = rain_forward(x, out.taps.bottleneck_mask);
      break;
    case NormVariant::kBain: {
      const BainParams<T> bp{p["bain.query.weight"], p["bain.query.bias"],
                             p["bain.key.weight"],   p["bain.key.bias"],
                             p["bain.value.weight"], p["bain.value.bias"]};
      BainOutput<T> b = bain_forward(x, out.taps.bottleneck_mask, bp);
      if (!b.passthrough) out.taps.attention = b.attention;
      x = b.feature;
      break;
    }
  }
  out.taps.normalized = x;

  for (int i = kStages; i >= 1; --i) {
    Var<T> skip = i == 1 ? input : enc[i - 2];
    x = concat_channels(upsample_nearest(x, 2), skip);
    x = relu(conv(p, "dec" + std::to_string(i), x, 1, 1));
  }
  out.head = sigmoid(conv(p, "head", x, 1, 1));
  out.harmonized = add(mul_mask(out.head, mask), mul_mask(composite, one_minus(mask)));
  return out;
}

template <typename T>
Var<T> reconstruction_loss(Var<T> harmonized, Var<T> real) {
  check_shape(harmonized.shape() == real.shape(),
              "reconstruction_loss: " + harmonized.shape().str() + " vs " + real.shape().str());
  return mean(abs(sub(harmonized, real)));
}

Tensor harmonize(const Harmonizer& net, const ParamStore& params, const Tensor& composite,
                 const Tensor& mask) {
  Tape<float> tape;
  BoundParams<float> bound(tape, params, false);
  return net.forward(bound, tape.constant(composite), tape.constant(mask)).harmonized.value();
}

template HarmonizerOutput<float> Harmonizer::forward(const BoundParams<float>&, Var<float>,
                                                     Var<float>) const;
template HarmonizerOutput<double> Harmonizer::forward(const BoundParams<double>&, Var<double>,
                                                      Var<double>) const;
template Var<float> reconstruction_loss(Var<float>, Var<float>);
template Var<double> reconstruction_loss(Var<double>, Var<double>);

}  // namespace scsco
