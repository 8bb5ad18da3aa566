#include "scsco/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>

#include "scsco/metrics.hpp"

namespace scsco {

std::string to_string(LossVariant v) {
  switch (v) {
    case LossVariant::kRecOnly: return "rec";
    case LossVariant::kRecSS: return "rec+ss";
    case LossVariant::kRecCS: return "rec+cs";
    case LossVariant::kRecSCS: return "rec+scs";
    case LossVariant::kRecTriplet: return "rec+triplet";
  }
  return "?";
}

LossVariant parse_loss_variant(const std::string& s) {
  if (s == "rec" || s == "rec-only") return LossVariant::kRecOnly;
  if (s == "rec+ss") return LossVariant::kRecSS;
  if (s == "rec+cs") return LossVariant::kRecCS;
  if (s == "rec+scs") return LossVariant::kRecSCS;
  if (s == "rec+triplet") return LossVariant::kRecTriplet;
  throw InvalidArgument("unknown loss variant '" + s +
                        "' (expected rec, rec+ss, rec+cs, rec+scs or rec+triplet)");
}

void TrainConfig::validate() const {
  if (!(lr0 > 0)) throw InvalidArgument("config: lr0 must be > 0");
  if (!(decay_factor > 0)) throw InvalidArgument("config: decay_factor must be > 0");
  if (batch_size < 1) throw InvalidArgument("config: batch_size must be >= 1");
  if (epochs < 1) throw InvalidArgument("config: epochs must be >= 1");
  if (k < 1) throw InvalidArgument("config: K must be >= 1");
  if (!(lambda >= 0)) throw InvalidArgument("config: lambda must be >= 0");
  if (!(triplet_margin >= 0)) throw InvalidArgument("config: triplet_margin must be >= 0");
  if (!(clip_norm > 0)) throw InvalidArgument("config: clip_norm must be > 0");
  if (heldout < 0) throw InvalidArgument("config: heldout must be >= 0");
  for (std::size_t i = 0; i < decay_epochs.size(); ++i) {
    if (decay_epochs[i] < 0 || (i > 0 && decay_epochs[i] <= decay_epochs[i - 1])) {
      throw InvalidArgument("config: decay_epochs must be non-negative and increasing");
    }
  }
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(base);
  h = mix(h ^ a);
  h = mix(h ^ b);
  h = mix(h ^ c);
  return h;
}

template <typename T>
AdamState<T> AdamState<T>::zeros_for(const BasicParamStore<T>& params) {
  AdamState s;
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m.emplace_back(params.tensor(i).shape());
    s.v.emplace_back(params.tensor(i).shape());
  }
  return s;
}

template <typename T>
void adam_step(BasicParamStore<T>& params, const BasicParamStore<T>& grads, AdamState<T>& state,
               double lr, const AdamHyper& hyper) {
  check_shape(grads.size() == params.size() && state.m.size() == params.size() &&
                  state.v.size() == params.size(),
              "adam_step: parameter, gradient and state counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    check_shape(grads.tensor(i).shape() == params.tensor(i).shape() &&
                    state.m[i].shape() == params.tensor(i).shape() &&
                    state.v[i].shape() == params.tensor(i).shape(),
                "adam_step: dims differ for '" + params.name(i) + "'");
    if (!grads.tensor(i).all_finite()) {
      throw NumericError("adam_step: non-finite gradient for '" + params.name(i) + "'");
    }
  }
  state.t += 1;
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params.tensor(i).data();
    auto g = grads.tensor(i).data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double gj = g[j];
      const double mj = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * gj;
      const double vj = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = lr * (mj / c1) / (std::sqrt(vj / c2) + hyper.eps);
      theta[j] = static_cast<T>(theta[j] - update);
    }
  }
}

double lr_at(int epoch, const TrainConfig& config) {
  if (epoch < 0) throw InvalidArgument("lr_at: epoch must be >= 0");
  const double scale = config.epochs / 120.0;
  double lr = config.lr0;
  if (!config.decay_epochs.empty()) {
    for (int milestone : config.decay_epochs) {
      if (epoch >= milestone) lr *= config.decay_factor;
    }
    return lr;
  }
  for (double milestone : {100.0, 110.0}) {
    if (epoch >= milestone * scale) lr *= config.decay_factor;
  }
  return lr;
}

template <typename T>
Var<T> triplet_loss(const StyleRep<T>& f, const StyleRep<T>& f_pos, const StyleRep<T>& b_pos,
                    double margin) {
  if (!(margin >= 0)) throw InvalidArgument("triplet_loss: margin must be >= 0");
  Var<T> gap = sub(style_distance(f, b_pos), style_distance(f_pos, b_pos));
  return relu(add_scalar(gap, margin));
}

double clip_global_norm(ParamStore& grads, double max_norm) {
  double sq = 0;
  for (std::size_t i = 0; i < grads.size(); ++i)
    for (float g : grads.tensor(i).data()) sq += static_cast<double>(g) * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (std::size_t i = 0; i < grads.size(); ++i)
      for (float& g : grads.tensor(i).data()) g = static_cast<float>(g * s);
  }
  return norm;
}

Dataset make_toy_dataset(int train_count, int heldout_count, int size, std::uint64_t seed) {
  Dataset ds;
  for (int i = 0; i < train_count + heldout_count; ++i) {
    const Scene scene = synth_scene(size, size, derive_seed(seed, 0x5ce7e, i));
    Sample s = synth_composite(scene.real, scene.mask, JitterSpec{},
                               derive_seed(seed, 0xc0a5, i), "toy" + std::to_string(i));
    (i < train_count ? ds.train : ds.heldout).push_back(std::move(s));
  }
  return ds;
}

namespace {

bool uses_contrast(LossVariant v) { return v != LossVariant::kRecOnly; }

template <typename T>
void fill_parts(const StyleTerms<T>& terms, const TrainConfig& config, Var<T>& ss, Var<T>& cs,
                Var<T>& triplet) {
  ss = ss_cr_loss(terms.f, terms.f_pos, terms.f_neg);
  cs = cs_cr_loss(terms.c, terms.c_pos, terms.c_neg);
  triplet = triplet_loss(terms.f, terms.f_pos, terms.b_pos, config.triplet_margin);
}

}  // namespace

template <typename T>
Var<T> sample_objective(Var<T> harmonized, const Sample& sample, const NegativeSet& negatives,
                        const StyleExtractor& extractor, const TrainConfig& config,
                        LossValues& values) {
  Tape<T>& tape = *harmonized.tape;
  Var<T> rec = reconstruction_loss(harmonized, tape.constant(sample.real.template cast<T>()));
  values.rec = rec.value()[0];

  Var<T> ss, cs, triplet;
  const bool in_graph = uses_contrast(config.loss) && config.lambda > 0;
  if (in_graph) {
    fill_parts(style_terms(extractor, harmonized, sample.real, negatives, sample.mask), config, ss,
               cs, triplet);
    values.ss = ss.value()[0];
    values.cs = cs.value()[0];
    values.triplet = triplet.value()[0];
  } else {
    Tape<T> side;
    Var<T> h = side.constant(harmonized.value());
    fill_parts(style_terms(extractor, h, sample.real, negatives, sample.mask), config, ss, cs,
               triplet);
    values.ss = ss.value()[0];
    values.cs = cs.value()[0];
    values.triplet = triplet.value()[0];
    values.total = values.rec;
    return rec;
  }

  Var<T> contrast;
  switch (config.loss) {
    case LossVariant::kRecSS: contrast = ss; break;
    case LossVariant::kRecCS: contrast = cs; break;
    case LossVariant::kRecSCS: contrast = add(ss, cs); break;
    case LossVariant::kRecTriplet: contrast = triplet; break;
    case LossVariant::kRecOnly: break;
  }
  Var<T> loss = add(rec, scale(contrast, config.lambda));
  values.total = loss.value()[0];
  return loss;
}

HeldoutScore evaluate_heldout(const Harmonizer& net, const ParamStore& params,
                              const std::vector<Sample>& samples) {
  HeldoutScore score;
  if (samples.empty()) return score;
  for (const Sample& s : samples) {
    const Tensor out = harmonize(net, params, s.composite, s.mask);
    score.psnr += psnr(out, s.real);
    score.fmse += fmse(out, s.real, s.mask);
    score.composite_psnr += psnr(s.composite, s.real);
    score.composite_fmse += fmse(s.composite, s.real, s.mask);
  }
  const double n = static_cast<double>(samples.size());
  score.psnr /= n;
  score.fmse /= n;
  score.composite_psnr /= n;
  score.composite_fmse /= n;
  return score;
}

TrainResult train(const TrainConfig& config, const Dataset& dataset,
                  const StyleExtractor& extractor, const EpochCallback& on_epoch) {
  config.validate();
  if (dataset.train.empty()) throw InvalidArgument("train: empty training set");

  const Harmonizer net(HarmonizerConfig{config.norm});
  TrainResult result;
  result.params = net.init_params(derive_seed(config.seed, 0x1417));
  AdamState<float> adam = AdamState<float>::zeros_for(result.params);

  std::vector<std::size_t> order(dataset.train.size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(derive_seed(config.seed, 0x5f1e, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const double lr = lr_at(epoch, config);

    EpochMetrics em;
    em.epoch = epoch;
    em.lr = lr;
    std::size_t seen = 0;
    int step = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++step) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::vector<Sample> batch;
      for (std::size_t i = start; i < stop; ++i) batch.push_back(dataset.train[order[i]]);

      ParamStore grad_sum = result.params.zeros_like();
      for (std::size_t j = 0; j < batch.size(); ++j) {
        const Sample& sample = batch[j];
        // A singleton batch (a short final batch, or batch_size 1) has no
        // in-batch donor, so its negatives borrow from the whole training set.
        const std::span<const Sample> donors =
            batch.size() > 1 ? std::span<const Sample>(batch) : std::span<const Sample>(dataset.train);
        const NegativeSet negs = generate_negatives(
            sample, donors, config.k, derive_seed(config.seed, 0x4e6, epoch, step * 1024 + j));
        LossValues values;
        Tape<float> tape;
        BoundParams<float> bound(tape, result.params, true);
        try {
          const HarmonizerOutput<float> out = net.forward(
              bound, tape.constant(sample.composite), tape.constant(sample.mask));
          Var<float> loss = sample_objective(out.harmonized, sample, negs, extractor, config, values);
          tape.backward(loss);
        } catch (const NumericError& e) {
          throw NumericError("non-finite loss on sample '" + sample.id + "': " + e.what());
        }
        const ParamStore g = bound.gradients();
        for (std::size_t p = 0; p < g.size(); ++p) {
          auto dst = grad_sum.tensor(p).data();
          auto src = g.tensor(p).data();
          for (std::size_t q = 0; q < dst.size(); ++q) dst[q] += src[q];
        }
        em.rec += values.rec;
        em.ss += values.ss;
        em.cs += values.cs;
        em.total += values.total;
        ++seen;
      }
      const float inv = 1.0f / static_cast<float>(batch.size());
      for (std::size_t p = 0; p < grad_sum.size(); ++p)
        for (float& v : grad_sum.tensor(p).data()) v *= inv;
      clip_global_norm(grad_sum, config.clip_norm);
      adam_step(result.params, grad_sum, adam, lr);
    }
    em.rec /= seen;
    em.ss /= seen;
    em.cs /= seen;
    em.total /= seen;
    const HeldoutScore hs = evaluate_heldout(net, result.params, dataset.heldout);
    em.heldout_psnr = hs.psnr;
    em.heldout_fmse = hs.fmse;
    em.heldout_composite_psnr = hs.composite_psnr;
    em.heldout_composite_fmse = hs.composite_fmse;
    result.history.push_back(em);
    if (on_epoch) on_epoch(em, result.params);
  }
  return result;
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(BasicParamStore<float>&, const BasicParamStore<float>&, AdamState<float>&,
                        double, const AdamHyper&);
template void adam_step(BasicParamStore<double>&, const BasicParamStore<double>&,
                        AdamState<double>&, double, const AdamHyper&);
template Var<float> triplet_loss(const StyleRep<float>&, const StyleRep<float>&,
                                 const StyleRep<float>&, double);
template Var<double> triplet_loss(const StyleRep<double>&, const StyleRep<double>&,
                                  const StyleRep<double>&, double);
template Var<float> sample_objective(Var<float>, const Sample&, const NegativeSet&,
                                     const StyleExtractor&, const TrainConfig&, LossValues&);
template Var<double> sample_objective(Var<double>, const Sample&, const NegativeSet&,
                                      const StyleExtractor&, const TrainConfig&, LossValues&);

}  // namespace scsco
