#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "scratch.hpp"
#include "scsco/io.hpp"

using namespace scsco;

namespace {

std::string netpbm(const char* magic, int w, int h, int channels, std::mt19937_64& rng) {
  std::string s = std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::uniform_int_distribution<int> byte(0, 255);
  for (int i = 0; i < w * h * channels; ++i) s.push_back(static_cast<char>(byte(rng)));
  return s;
}

ParamStore sample_store(std::mt19937_64& rng) {
  ParamStore p;
  p.add("enc1.weight", oracle::random_tensor<float>(rng, {4, 3, 3, 3}));
  p.add("enc1.bias", oracle::random_tensor<float>(rng, {1, 4, 1, 1}));
  p.add("odd name/with spaces", Tensor({1, 1, 1, 1}, -0.0f));
  return p;
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("PPM and PGM round-trip bitwise") {
    std::mt19937_64 rng(51);
    for (int i = 0; i < 10; ++i) {
      const int w = 1 + i * 3, h = 2 + i;
      const std::string ppm = netpbm("P6", w, h, 3, rng);
      const Tensor img = decode_ppm(ppm, "t.ppm");
      CHECK(img.shape() == Shape{1, 3, h, w});
      CHECK(encode_ppm(img) == ppm);
      const std::string pgm = netpbm("P5", w, h, 1, rng);
      CHECK(encode_pgm(decode_pgm(pgm, "t.pgm")) == pgm);
    }
  }

  TEST_CASE("netpbm headers with comments parse") {
    const std::string ppm = std::string("P6 # c\n# more\n2 1\n255\n") + std::string(6, '\x80');
    const Tensor img = decode_ppm(ppm, "c.ppm");
    CHECK(img.at(0, 0, 0, 1) == 128.0f / 255.0f);
  }

  TEST_CASE("malformed netpbm files are errors naming the file") {
    CHECK_THROWS_WITH_AS(decode_ppm("P5\n1 1\n255\n\x01", "x.ppm"), doctest::Contains("x.ppm"), IoError);
    CHECK_THROWS_AS(decode_ppm("P6\n2 2\n255\n\x01\x02", "x.ppm"), IoError);
    CHECK_THROWS_AS(decode_ppm("P6\n1 1\n65535\n\x01\x02\x03\x04\x05\x06", "x.ppm"), IoError);
    CHECK_THROWS_AS(decode_pgm("P5\n1 1\n255\n\x01\x02", "x.pgm"), IoError);
    CHECK_THROWS_AS(read_ppm("/nonexistent/dir/a.ppm"), IoError);
  }

  TEST_CASE("mask threshold is 128") {
    ScratchDir dir("mask");
    write_file(dir / "m.pgm", std::string("P5\n4 1\n255\n") + std::string("\x00\x7f\x80\xff", 4));
    const Tensor m = read_mask(dir / "m.pgm");
    CHECK(m[0] == 0.0f);
    CHECK(m[1] == 0.0f);
    CHECK(m[2] == 1.0f);
    CHECK(m[3] == 1.0f);
    CHECK_THROWS_AS(write_mask(dir / "bad.pgm", Tensor({1, 1, 1, 1}, 0.5f)), InvalidArgument);
  }

  TEST_CASE("checkpoints round-trip bitwise") {
    std::mt19937_64 rng(52);
    const ParamStore p = sample_store(rng);
    const std::string bytes = encode_checkpoint(p);
    CHECK(bytes.substr(0, 4) == "SCSC");
    const ParamStore q = decode_checkpoint(bytes, "c");
    REQUIRE(q.size() == p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(q.name(i) == p.name(i));
      CHECK(bit_equal(q.tensor(i), p.tensor(i)));
    }
    CHECK(encode_checkpoint(q) == bytes);
  }

  TEST_CASE("checkpoint version mismatch and corruption are load errors") {
    std::mt19937_64 rng(53);
    std::string bytes = encode_checkpoint(sample_store(rng));
    std::string wrong_version = bytes;
    wrong_version[4] = 2;
    CHECK_THROWS_WITH_AS(decode_checkpoint(wrong_version, "v.ckpt"), doctest::Contains("version"),
                         IoError);
    std::string wrong_magic = bytes;
    wrong_magic[0] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(wrong_magic, "m"), IoError);
    CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3), "t"), IoError);
    ParamStore dup;
    dup.add("a", Tensor({1, 1, 1, 1}));
    const std::string one = encode_checkpoint(dup);
    CHECK_THROWS_AS(decode_checkpoint(one + one.substr(8), "d"), IoError);
  }

  TEST_CASE("loading into a typed layout rejects unknown, missing and mis-shaped names") {
    std::mt19937_64 rng(54);
    const ParamStore layout = sample_store(rng);
    ParamStore extra = layout;
    extra.add("stray", Tensor({1, 1, 1, 1}));
    CHECK_THROWS_WITH_AS(conform_to_layout(extra, layout, "c"), doctest::Contains("stray"), IoError);
    ParamStore missing;
    missing.add("enc1.weight", layout["enc1.weight"]);
    CHECK_THROWS_AS(conform_to_layout(missing, layout, "c"), IoError);
    ParamStore shaped = layout;
    shaped["enc1.bias"] = Tensor({1, 5, 1, 1});
    CHECK_THROWS_AS(conform_to_layout(shaped, layout, "c"), IoError);
    // Reordered records are put back in layout order.
    ParamStore reordered;
    for (std::size_t i = layout.size(); i-- > 0;) reordered.add(layout.name(i), layout.tensor(i));
    CHECK(conform_to_layout(reordered, layout, "c") == layout);
  }

  TEST_CASE("harmonizer checkpoints carry the normalization variant") {
    ScratchDir dir("model");
    const Harmonizer net(HarmonizerConfig{NormVariant::kRain});
    const ParamStore p = net.init_params(3);
    save_harmonizer(dir / "m.ckpt", net, p);
    const HarmonizerModel m = load_harmonizer(dir / "m.ckpt");
    CHECK(m.net.config().norm == NormVariant::kRain);
    CHECK(m.params == p);
    // A plain checkpoint without the variant record is not a harmonizer.
    save_checkpoint(dir / "plain.ckpt", p);
    CHECK_THROWS_AS(load_harmonizer(dir / "plain.ckpt"), IoError);
  }

  TEST_CASE("manifest parsing") {
    const auto e = parse_manifest("# header\na.ppm\tm.pgm\n\n/abs/b.ppm\tn.pgm\tc.ppm  # note\n",
                                  "/data", "man");
    REQUIRE(e.size() == 2);
    CHECK(e[0].image == std::filesystem::path("/data/a.ppm"));
    CHECK_FALSE(e[0].composite.has_value());
    CHECK(e[1].image == std::filesystem::path("/abs/b.ppm"));
    CHECK(*e[1].composite == std::filesystem::path("/data/c.ppm"));
    CHECK_THROWS_WITH_AS(parse_manifest("only-one-field\n", "/d", "man.tsv"),
                         doctest::Contains("man.tsv"), IoError);
  }

  TEST_CASE("manifest write then read") {
    ScratchDir dir("manifest");
    write_manifest(dir / "manifest.tsv", {{"a.ppm", "a.pgm", std::nullopt}, {"b.ppm", "b.pgm", "c.ppm"}});
    const auto e = read_manifest(resolve_manifest(dir.path()));
    REQUIRE(e.size() == 2);
    CHECK(e[1].composite == dir / "c.ppm");
    CHECK_THROWS_AS(resolve_manifest(dir / "missing"), IoError);
  }

  TEST_CASE("samples with mismatched dimensions name both files") {
    ScratchDir dir("sample");
    write_ppm(dir / "a.ppm", Tensor({1, 3, 4, 4}, 0.5f));
    write_mask(dir / "m.pgm", Tensor({1, 1, 4, 5}));
    const ManifestEntry e{dir / "a.ppm", dir / "m.pgm", std::nullopt};
    CHECK_THROWS_WITH_AS(load_sample(e, "x"), doctest::Contains("m.pgm"), IoError);
  }

  TEST_CASE("config parsing") {
    const TrainConfig c = parse_config(
        "# toy\nlr0 = 0.002\nepochs=3\nK=4\nlambda=0\nloss=rec\nnorm=rain\nseed=9\n"
        "decay_epochs=1, 2\nheldout=0\n",
        "cfg");
    CHECK(c.lr0 == 0.002);
    CHECK(c.epochs == 3);
    CHECK(c.k == 4);
    CHECK(c.lambda == 0);
    CHECK(c.loss == LossVariant::kRecOnly);
    CHECK(c.norm == NormVariant::kRain);
    CHECK(c.seed == 9);
    CHECK(c.decay_epochs == std::vector<int>{1, 2});
    CHECK(c.heldout == 0);
    CHECK_THROWS_WITH_AS(parse_config("learning_rate=1\n", "cfg"), doctest::Contains("unknown key"),
                         IoError);
    CHECK_THROWS_AS(parse_config("epochs=1\nepochs=2\n", "cfg"), IoError);
    CHECK_THROWS_AS(parse_config("epochs=two\n", "cfg"), IoError);
    CHECK_THROWS_AS(parse_config("epochs=0\n", "cfg"), IoError);
    CHECK_THROWS_AS(parse_config("norm=batch\n", "cfg"), IoError);
    CHECK_THROWS_AS(parse_config("lambda\n", "cfg"), IoError);
  }

  TEST_CASE("tally parsing") {
    const PairwiseTally t = parse_tally("# votes\nours\tbase\n0 3\n1\t0\n", "t");
    CHECK(t.methods == std::vector<std::string>{"ours", "base"});
    CHECK(t.wins[0][1] == 3);
    CHECK(t.wins[1][0] == 1);
    CHECK_THROWS_AS(parse_tally("a b\n0 1\n", "t"), IoError);
    CHECK_THROWS_AS(parse_tally("a b\n0 x\n1 0\n", "t"), IoError);
  }

  TEST_CASE("metric log layout") {
    EpochMetrics m;
    m.epoch = 3;
    m.lr = 1e-3;
    m.rec = 0.5;
    m.ss = 0.25;
    m.cs = 0.125;
    m.heldout_psnr = 30;
    m.heldout_fmse = 100;
    CHECK(metric_log_header() == "epoch\tlr\tL_rec\tL_ss\tL_cs\theldout_PSNR\theldout_fMSE\n");
    CHECK(format_metric_row(m) == "3\t0.001\t0.5\t0.25\t0.125\t30.000000\t100.000000\n");
  }
}
