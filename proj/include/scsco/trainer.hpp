#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "scsco/composites.hpp"
#include "scsco/harmonizer.hpp"
#include "scsco/style.hpp"

namespace scsco {

enum class LossVariant { kRecOnly, kRecSS, kRecCS, kRecSCS, kRecTriplet };

std::string to_string(LossVariant v);
LossVariant parse_loss_variant(const std::string& s);

struct TrainConfig {
  double lr0 = 1e-3;
  double decay_factor = 0.1;
  // Epochs at which the rate is multiplied by decay_factor. Empty means the
  // reference breakpoints 100 and 110 of 120, rescaled to `epochs`.
  std::vector<int> decay_epochs;
  int batch_size = 4;
  int epochs = 12;
  int k = 5;
  double lambda = 0.01;
  std::uint64_t seed = 1;
  LossVariant loss = LossVariant::kRecSCS;
  NormVariant norm = NormVariant::kBain;
  double triplet_margin = 0.1;
  double clip_norm = 5.0;
  // Trailing samples of a dataset manifest held out for evaluation.
  int heldout = 16;

  void validate() const;
};

// Adam moments and step count for one parameter store.
template <typename T>
struct AdamState {
  std::vector<BasicTensor<T>> m;
  std::vector<BasicTensor<T>> v;
  long long t = 0;

  static AdamState zeros_for(const BasicParamStore<T>& params);
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update. Throws NumericError (leaving params and
// state untouched) when any gradient is non-finite.
template <typename T>
void adam_step(BasicParamStore<T>& params, const BasicParamStore<T>& grads, AdamState<T>& state,
               double lr, const AdamHyper& hyper = {});

// Piecewise-constant schedule: lr0, multiplied by decay_factor at each decay
// epoch (by default 100/120 and 110/120 of the configured run length).
double lr_at(int epoch, const TrainConfig& config);

// max(0, D(f, b+) - D(f+, b+) + margin)
template <typename T>
Var<T> triplet_loss(const StyleRep<T>& f, const StyleRep<T>& f_pos, const StyleRep<T>& b_pos,
                    double margin);

// Scales grads in place so their global L2 norm is at most max_norm; returns
// the norm before clipping.
double clip_global_norm(ParamStore& grads, double max_norm);

struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> heldout;
};

// Procedural dataset of synthesized composites over synth_scene images.
Dataset make_toy_dataset(int train_count, int heldout_count, int size, std::uint64_t seed);

struct LossValues {
  double total = 0;
  double rec = 0;
  double ss = 0;
  double cs = 0;
  double triplet = 0;
};

// Loss for one sample under the configured variant, recorded on the tape of
// `harmonized`. Contrastive parts that do not enter the objective (or all of
// them when lambda == 0) are evaluated on a separate tape for reporting only.
template <typename T>
Var<T> sample_objective(Var<T> harmonized, const Sample& sample, const NegativeSet& negatives,
                        const StyleExtractor& extractor, const TrainConfig& config,
                        LossValues& values);

struct EpochMetrics {
  int epoch = 0;
  double lr = 0;
  double rec = 0;
  double ss = 0;
  double cs = 0;
  double total = 0;
  double heldout_psnr = 0;
  double heldout_fmse = 0;
  double heldout_composite_psnr = 0;
  double heldout_composite_fmse = 0;
};

struct TrainResult {
  ParamStore params;
  std::vector<EpochMetrics> history;
};

struct HeldoutScore {
  double psnr = 0;
  double fmse = 0;
  double composite_psnr = 0;
  double composite_fmse = 0;
};

HeldoutScore evaluate_heldout(const Harmonizer& net, const ParamStore& params,
                              const std::vector<Sample>& samples);

using EpochCallback = std::function<void(const EpochMetrics&, const ParamStore&)>;

// Deterministic given config, dataset and extractor.
TrainResult train(const TrainConfig& config, const Dataset& dataset,
                  const StyleExtractor& extractor, const EpochCallback& on_epoch = {});

// Splitmix-style seed derivation for independent streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

}  // namespace scsco
