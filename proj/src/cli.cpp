#include "scsco/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "scsco/composites.hpp"
#include "scsco/gradsuite.hpp"
#include "scsco/io.hpp"
#include "scsco/metrics.hpp"
#include "scsco/trainer.hpp"

namespace scsco {
namespace {

namespace fs = std::filesystem;

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string numbered(const char* prefix, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04zu%s", prefix, i, ext);
  return buf;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string() + ": cannot create directory: " + ec.message());
}

struct ScenesArgs {
  fs::path out_dir;
  int count = 16;
  std::uint64_t seed = 1;
  int size = 64;
};

int cmd_scenes(const ScenesArgs& a, std::ostream& err) {
  make_dir(a.out_dir);
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < a.count; ++i) {
    const Scene scene = synth_scene(a.size, a.size, derive_seed(a.seed, 0x5ce7e, i));
    ManifestEntry e{numbered("real", i, ".ppm"), numbered("mask", i, ".pgm"), std::nullopt};
    write_ppm(a.out_dir / e.image, scene.real);
    write_mask(a.out_dir / e.mask, scene.mask);
    entries.push_back(std::move(e));
  }
  write_manifest(a.out_dir / "manifest.tsv", entries);
  err << "wrote " << a.count << " scenes to " << a.out_dir.string() << "\n";
  return kExitOk;
}

struct SynthArgs {
  fs::path manifest;
  fs::path out_dir;
  std::uint64_t seed = 1;
  int count = -1;
};

// Composite i distorts record i modulo the manifest length, so a count larger
// than the manifest yields several composites per real image.
int cmd_synth(const SynthArgs& a, std::ostream& err) {
  const std::vector<ManifestEntry> source = read_manifest(a.manifest);
  const std::size_t count = a.count < 0 ? source.size() : static_cast<std::size_t>(a.count);
  if (count > 0 && source.empty())
    throw IoError(a.manifest.string() + ": manifest is empty but --count is " +
                  std::to_string(count));

  // Every input is read and checked before anything is written.
  std::vector<Sample> reals;
  for (const ManifestEntry& e : source) {
    Sample s = load_sample(e, e.image.stem().string());
    try {
      validate_mask(s.real, s.mask, e.mask.string());
    } catch (const InvalidArgument& ex) {
      throw IoError(e.mask.string() + ": " + ex.what());
    }
    reals.push_back(std::move(s));
  }

  make_dir(a.out_dir);
  std::vector<ManifestEntry> out;
  for (std::size_t i = 0; i < count; ++i) {
    const Sample& src = reals[i % reals.size()];
    const Sample s = synth_composite(src.real, src.mask, JitterSpec{},
                                     derive_seed(a.seed, 0xc0a5, i), src.id);
    ManifestEntry e{numbered("real", i, ".ppm"), numbered("mask", i, ".pgm"),
                    fs::path(numbered("comp", i, ".ppm"))};
    write_ppm(a.out_dir / e.image, s.real);
    write_mask(a.out_dir / e.mask, s.mask);
    write_ppm(a.out_dir / *e.composite, s.composite);
    out.push_back(std::move(e));
  }
  write_manifest(a.out_dir / "manifest.tsv", out);
  err << "wrote " << count << " composites to " << a.out_dir.string() << "\n";
  return kExitOk;
}

std::vector<Sample> load_all(const std::vector<ManifestEntry>& entries) {
  std::vector<Sample> samples;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string stem = (entries[i].composite ? *entries[i].composite : entries[i].image)
                                 .stem()
                                 .string();
    samples.push_back(load_sample(entries[i], numbered("", i, "").substr(1) + ":" + stem));
  }
  return samples;
}

struct TrainArgs {
  fs::path config;
  fs::path data;
  fs::path out;
  fs::path extractor;
};

int cmd_train(const TrainArgs& a, std::ostream& err) {
  const TrainConfig config = read_config(a.config);
  std::vector<Sample> samples = load_all(read_manifest(resolve_manifest(a.data)));
  if (static_cast<std::size_t>(config.heldout) >= samples.size()) {
    throw InvalidArgument(a.data.string() + ": " + std::to_string(samples.size()) +
                          " samples leave nothing to train on with heldout=" +
                          std::to_string(config.heldout));
  }
  Dataset ds;
  const std::size_t n_train = samples.size() - static_cast<std::size_t>(config.heldout);
  for (std::size_t i = 0; i < samples.size(); ++i)
    (i < n_train ? ds.train : ds.heldout).push_back(std::move(samples[i]));

  const StyleExtractor extractor =
      a.extractor.empty() ? StyleExtractor::standin() : StyleExtractor(read_checkpoint(a.extractor));

  make_dir(a.out);
  const Harmonizer net(HarmonizerConfig{config.norm});
  std::string log = metric_log_header();
  const TrainResult result = train(config, ds, extractor, [&](const EpochMetrics& m, const ParamStore& p) {
    save_harmonizer(a.out / numbered("epoch", static_cast<std::size_t>(m.epoch), ".ckpt"), net, p);
    log += format_metric_row(m);
    write_file(a.out / "metrics.tsv", log);
    err << "epoch " << m.epoch << "  lr " << m.lr << "  loss " << m.total << "  heldout PSNR "
        << fmt("%.3f", m.heldout_psnr) << " (composite " << fmt("%.3f", m.heldout_composite_psnr)
        << ")\n";
  });
  save_harmonizer(a.out / "final.ckpt", net, result.params);
  write_file(a.out / "metrics.tsv", log);
  return kExitOk;
}

struct EvalArgs {
  fs::path checkpoint;
  fs::path data;
};

struct Scores {
  double psnr = 0, mse = 0, fmse = 0;
};

Scores score(const Tensor& x, const Tensor& real, const Tensor& mask) {
  return {psnr(x, real), mse(x, real), fmse(x, real, mask)};
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const HarmonizerModel model = load_harmonizer(a.checkpoint);
  const std::vector<ManifestEntry> entries = read_manifest(resolve_manifest(a.data));

  out << "sample\tcomposite_PSNR\tcomposite_MSE\tcomposite_fMSE\tharmonized_PSNR\tharmonized_MSE"
         "\tharmonized_fMSE\n";
  auto row = [&](const std::string& id, const Scores& c, const Scores& h) {
    out << id << '\t' << fmt("%.6f", c.psnr) << '\t' << fmt("%.6f", c.mse) << '\t'
        << fmt("%.6f", c.fmse) << '\t' << fmt("%.6f", h.psnr) << '\t' << fmt("%.6f", h.mse) << '\t'
        << fmt("%.6f", h.fmse) << '\n';
  };

  Scores sum_c, sum_h;
  std::size_t evaluated = 0, skipped = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const ManifestEntry& e = entries[i];
    const std::string id = (e.composite ? *e.composite : e.image).filename().string();
    Scores c, h;
    try {
      const Sample s = load_sample(e, id);
      const Tensor harmonized = harmonize(model.net, model.params, s.composite, s.mask);
      c = score(s.composite, s.real, s.mask);
      h = score(harmonized, s.real, s.mask);
    } catch (const IoError& ex) {
      err << "warning: skipping " << id << ": " << ex.what() << "\n";
      ++skipped;
      continue;
    } catch (const InvalidArgument& ex) {
      err << "warning: skipping " << id << ": " << ex.what() << "\n";
      ++skipped;
      continue;
    }
    row(id, c, h);
    sum_c = {sum_c.psnr + c.psnr, sum_c.mse + c.mse, sum_c.fmse + c.fmse};
    sum_h = {sum_h.psnr + h.psnr, sum_h.mse + h.mse, sum_h.fmse + h.fmse};
    ++evaluated;
  }
  if (evaluated > 0) {
    const double n = static_cast<double>(evaluated);
    row("mean", {sum_c.psnr / n, sum_c.mse / n, sum_c.fmse / n},
        {sum_h.psnr / n, sum_h.mse / n, sum_h.fmse / n});
  }
  out << "# evaluated " << evaluated << " skipped " << skipped << "\n";
  if (evaluated == 0 && !entries.empty()) {
    err << "error: no sample could be evaluated\n";
    return kExitData;
  }
  return kExitOk;
}

int cmd_gradcheck(const std::string& scope, std::ostream& out) {
  out << "case\tprobed\tmax_rel_err\tmax_abs_err\ttol\tresult\n";
  const GradSuiteResult r = run_grad_suite(scope, [&](const GradCheckReport& rep) {
    out << rep.op << '\t' << rep.probed << '\t' << fmt("%.3e", rep.max_rel_err) << '\t'
        << fmt("%.3e", rep.max_abs_err) << '\t' << fmt("%.0e", rep.tol) << '\t'
        << (rep.pass ? "PASS" : "FAIL") << '\n';
    out.flush();
  });
  const auto failed = std::count_if(r.reports.begin(), r.reports.end(),
                                    [](const GradCheckReport& rep) { return !rep.pass; });
  out << "# " << r.reports.size() << " cases, " << failed << " failed\n";
  return r.pass ? kExitOk : kExitNumeric;
}

struct HarmonizeArgs {
  fs::path checkpoint;
  fs::path image;
  fs::path mask;
  fs::path out;
};

int cmd_harmonize(const HarmonizeArgs& a) {
  const HarmonizerModel model = load_harmonizer(a.checkpoint);
  const Tensor image = read_ppm(a.image);
  const Tensor mask = read_mask(a.mask);
  const Shape s = image.shape();
  if (mask.shape().h != s.h || mask.shape().w != s.w)
    throw IoError(a.mask.string() + ": mask dims differ from " + a.image.string());
  if (s.h % 16 != 0 || s.w % 16 != 0) {
    throw InvalidArgument(a.image.string() + ": " + std::to_string(s.w) + "x" +
                          std::to_string(s.h) + " is not divisible by 16");
  }
  write_ppm(a.out, harmonize(model.net, model.params, image, mask));
  return kExitOk;
}

int cmd_btrank(const fs::path& tally_path, std::ostream& out, std::ostream& err) {
  const PairwiseTally tally = read_tally(tally_path);
  const BtFit fit = bt_fit(tally);
  if (!fit.converged) err << "warning: B-T fit stopped after " << fit.iterations << " iterations\n";

  std::vector<std::size_t> order(tally.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return fit.scores[x] > fit.scores[y]; });
  out << "rank\tmethod\tscore\n";
  for (std::size_t r = 0; r < order.size(); ++r)
    out << r + 1 << '\t' << tally.methods[order[r]] << '\t' << fmt("%.9f", fit.scores[order[r]])
        << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Image harmonization with background-attentional normalization and style "
               "contrastive training."};
  app.name("scsco");
  app.require_subcommand(1);

  ScenesArgs scenes;
  auto* c_scenes = app.add_subcommand("scenes", "Render procedural real images with masks");
  c_scenes->add_option("--out-dir", scenes.out_dir)->required();
  c_scenes->add_option("--count", scenes.count)->check(CLI::NonNegativeNumber);
  c_scenes->add_option("--seed", scenes.seed);
  c_scenes->add_option("--size", scenes.size)->check(CLI::PositiveNumber);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Synthesize composites from real images and masks");
  c_synth->add_option("--manifest", synth.manifest)->required();
  c_synth->add_option("--out-dir", synth.out_dir)->required();
  c_synth->add_option("--seed", synth.seed)->required();
  c_synth->add_option("--count", synth.count, "default: one per manifest record")
      ->check(CLI::NonNegativeNumber);

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a harmonizer");
  c_train->add_option("--config", tr.config)->required();
  c_train->add_option("--data", tr.data, "manifest or directory holding manifest.tsv")->required();
  c_train->add_option("--out", tr.out, "output directory")->required();
  c_train->add_option("--extractor", tr.extractor, "style extractor weights (checkpoint format)");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Score a checkpoint on a dataset");
  c_eval->add_option("--checkpoint", ev.checkpoint)->required();
  c_eval->add_option("--data", ev.data)->required();

  std::string scope = "all";
  auto* c_grad = app.add_subcommand("gradcheck", "Run the finite-difference gradient suite");
  c_grad->add_option("--scope", scope)->check(CLI::IsMember({"all", "tensor", "bain", "loss", "net"}));

  HarmonizeArgs hz;
  auto* c_hz = app.add_subcommand("harmonize", "Harmonize one composite");
  c_hz->add_option("--checkpoint", hz.checkpoint)->required();
  c_hz->add_option("--image", hz.image)->required();
  c_hz->add_option("--mask", hz.mask)->required();
  c_hz->add_option("--out", hz.out)->required();

  fs::path tally;
  auto* c_bt = app.add_subcommand("btrank", "Bradley-Terry scores from a pairwise tally");
  c_bt->add_option("--tally", tally)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*c_scenes) return cmd_scenes(scenes, err);
    if (*c_synth) return cmd_synth(synth, err);
    if (*c_train) return cmd_train(tr, err);
    if (*c_eval) return cmd_eval(ev, out, err);
    if (*c_grad) return cmd_gradcheck(scope, out);
    if (*c_hz) return cmd_harmonize(hz);
    if (*c_bt) return cmd_btrank(tally, out, err);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitUsage;
}

}  // namespace scsco
