#include "scsco/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace scsco {
namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError(path.string() + ": read failed");
  return ss.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path.string() + ": write failed");
}

namespace {

// ---- netpbm ---------------------------------------------------------------

class HeaderReader {
 public:
  HeaderReader(std::string_view bytes, const std::string& context)
      : bytes_(bytes), context_(context) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  int number(const char* what) {
    skip_space_and_comments();
    long long v = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > (1 << 24)) throw IoError(context_ + ": " + what + " too large");
      ++pos_;
      ++digits;
    }
    if (digits == 0) throw IoError(context_ + ": malformed header, expected " + what);
    return static_cast<int>(v);
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      throw IoError(context_ + ": malformed header, missing separator before raster");
    }
    return pos_ + 1;
  }

  std::size_t pos_ = 2;

 private:
  std::string_view bytes_;
  const std::string& context_;
};

Tensor decode_netpbm(std::string_view bytes, const std::string& context, char kind,
                     int channels) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != kind) {
    throw IoError(context + ": not a binary P" + std::string(1, kind) + " file");
  }
  HeaderReader h(bytes, context);
  const int width = h.number("width");
  const int height = h.number("height");
  const int maxval = h.number("maxval");
  if (width < 1 || height < 1) throw IoError(context + ": image has zero size");
  if (maxval != 255) {
    throw IoError(context + ": unsupported maxval " + std::to_string(maxval) + " (need 255)");
  }
  const std::size_t start = h.raster_start();
  const std::size_t plane = static_cast<std::size_t>(width) * height;
  const std::size_t need = plane * channels;
  if (bytes.size() - start < need) {
    throw IoError(context + ": truncated raster (" + std::to_string(bytes.size() - start) +
                  " of " + std::to_string(need) + " bytes)");
  }
  if (bytes.size() - start > need) throw IoError(context + ": trailing bytes after raster");
  Tensor t({1, channels, height, width});
  for (std::size_t p = 0; p < plane; ++p)
    for (int c = 0; c < channels; ++c) {
      const auto byte = static_cast<unsigned char>(bytes[start + p * channels + c]);
      t[c * plane + p] = static_cast<float>(byte) / 255.0f;
    }
  return t;
}

unsigned char to_byte(float v) {
  const double x = std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0;
  return static_cast<unsigned char>(std::lround(x));
}

std::string encode_netpbm(const Tensor& t, char kind, int channels) {
  const Shape s = t.shape();
  check_shape(s.n == 1 && s.c == channels && s.h > 0 && s.w > 0,
              std::string("encode P") + kind + ": expected [1," + std::to_string(channels) +
                  ",h,w], got " + s.str());
  for (float v : t.data()) {
    if (!std::isfinite(v)) throw NumericError("encode image: non-finite sample");
  }
  std::string out = "P" + std::string(1, kind) + "\n" + std::to_string(s.w) + " " +
                    std::to_string(s.h) + "\n255\n";
  const std::size_t plane = s.plane();
  const std::size_t header = out.size();
  out.resize(header + plane * channels);
  for (std::size_t p = 0; p < plane; ++p)
    for (int c = 0; c < channels; ++c)
      out[header + p * channels + c] = static_cast<char>(to_byte(t[c * plane + p]));
  return out;
}

// ---- little-endian primitives ----------------------------------------------

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class ByteReader {
 public:
  ByteReader(std::string_view bytes, const std::string& context)
      : bytes_(bytes), context_(context) {}

  bool done() const { return pos_ == bytes_.size(); }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    std::string_view v = bytes_.substr(pos_, n);
    pos_ += n;
    return v;
  }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw IoError(context_ + ": truncated checkpoint while reading " + what);
    }
  }

  std::string_view bytes_;
  const std::string& context_;
  std::size_t pos_ = 0;
};

// ---- text helpers ----------------------------------------------------------

std::string_view strip_comment(std::string_view line) {
  const std::size_t hash = line.find('#');
  if (hash != std::string_view::npos) line = line.substr(0, hash);
  while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) {
    line.remove_suffix(1);
  }
  while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front()))) {
    line.remove_prefix(1);
  }
  return line;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.emplace_back(line.substr(start, i - start));
  }
  return out;
}

std::string where(const std::string& context, std::size_t line_index) {
  return context + ":" + std::to_string(line_index + 1);
}

double parse_double(const std::string& v, const std::string& at, const std::string& key) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty() || !std::isfinite(out)) {
    throw IoError(at + ": '" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

long long parse_int(const std::string& v, const std::string& at, const std::string& what) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) {
    throw IoError(at + ": " + what + " expects an integer, got '" + v + "'");
  }
  return out;
}

int parse_int32(const std::string& v, const std::string& at, const std::string& what) {
  const long long x = parse_int(v, at, what);
  if (x < -(1LL << 31) || x >= (1LL << 31)) throw IoError(at + ": " + what + " out of range");
  return static_cast<int>(x);
}

}  // namespace

std::string encode_ppm(const Tensor& image) { return encode_netpbm(image, '6', 3); }
Tensor decode_ppm(std::string_view bytes, const std::string& context) {
  return decode_netpbm(bytes, context, '6', 3);
}
std::string encode_pgm(const Tensor& gray) { return encode_netpbm(gray, '5', 1); }
Tensor decode_pgm(std::string_view bytes, const std::string& context) {
  return decode_netpbm(bytes, context, '5', 1);
}

Tensor read_ppm(const fs::path& path) { return decode_ppm(read_file(path), path.string()); }
void write_ppm(const fs::path& path, const Tensor& image) { write_file(path, encode_ppm(image)); }
Tensor read_pgm(const fs::path& path) { return decode_pgm(read_file(path), path.string()); }
void write_pgm(const fs::path& path, const Tensor& gray) { write_file(path, encode_pgm(gray)); }

Tensor read_mask(const fs::path& path) {
  Tensor gray = read_pgm(path);
  for (float& v : gray.data()) v = v >= 128.0f / 255.0f ? 1.0f : 0.0f;
  return gray;
}

void write_mask(const fs::path& path, const Tensor& mask) {
  for (float v : mask.data()) {
    check_shape(v == 0.0f || v == 1.0f, "write_mask: mask is not binary");
  }
  write_pgm(path, mask);
}

// ---- checkpoints -------------------------------------------------------------

std::string encode_checkpoint(const ParamStore& store) {
  std::string out = "SCSC";
  put_u32(out, kCheckpointVersion);
  for (std::size_t i = 0; i < store.size(); ++i) {
    const std::string& name = store.name(i);
    const Tensor& t = store.tensor(i);
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, 4);
    const Shape s = t.shape();
    for (int d : {s.n, s.c, s.h, s.w}) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

ParamStore decode_checkpoint(std::string_view bytes, const std::string& context) {
  ByteReader r(bytes, context);
  if (r.take(4, "magic") != "SCSC") throw IoError(context + ": not a checkpoint (bad magic)");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw IoError(context + ": checkpoint version " + std::to_string(version) +
                  " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  ParamStore store;
  while (!r.done()) {
    const std::uint32_t len = r.u32("name length");
    const std::string name(r.take(len, "name"));
    const std::uint32_t rank = r.u32("rank");
    if (rank < 1 || rank > 4) {
      throw IoError(context + ": tensor '" + name + "' has unsupported rank " +
                    std::to_string(rank));
    }
    int dims[4] = {1, 1, 1, 1};
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t v = r.u32("dims");
      if (v > (1u << 28)) throw IoError(context + ": tensor '" + name + "' dim too large");
      dims[4 - rank + d] = static_cast<int>(v);
    }
    Tensor t({dims[0], dims[1], dims[2], dims[3]});
    for (float& v : t.data()) v = std::bit_cast<float>(r.u32("payload"));
    if (store.contains(name)) throw IoError(context + ": duplicate tensor '" + name + "'");
    store.add(name, std::move(t));
  }
  return store;
}

void save_checkpoint(const fs::path& path, const ParamStore& store) {
  write_file(path, encode_checkpoint(store));
}

ParamStore read_checkpoint(const fs::path& path) {
  return decode_checkpoint(read_file(path), path.string());
}

ParamStore conform_to_layout(const ParamStore& loaded, const ParamStore& layout,
                             const std::string& context) {
  for (const std::string& name : loaded.names()) {
    if (!layout.contains(name)) throw IoError(context + ": unknown tensor '" + name + "'");
  }
  ParamStore out;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const std::string& name = layout.name(i);
    if (!loaded.contains(name)) throw IoError(context + ": missing tensor '" + name + "'");
    const Tensor& t = loaded[name];
    if (!(t.shape() == layout.tensor(i).shape())) {
      throw IoError(context + ": tensor '" + name + "' has dims " + t.shape().str() +
                    ", expected " + layout.tensor(i).shape().str());
    }
    out.add(name, t);
  }
  return out;
}

void save_harmonizer(const fs::path& path, const Harmonizer& net, const ParamStore& params) {
  ParamStore store;
  store.add("meta.norm", Tensor::scalar(static_cast<float>(net.config().norm)));
  for (std::size_t i = 0; i < params.size(); ++i) store.add(params.name(i), params.tensor(i));
  save_checkpoint(path, store);
}

HarmonizerModel load_harmonizer(const fs::path& path) {
  const ParamStore raw = read_checkpoint(path);
  if (!raw.contains("meta.norm")) {
    throw IoError(path.string() + ": not a harmonizer checkpoint (no meta.norm)");
  }
  const Tensor& tag = raw["meta.norm"];
  const float code = tag.size() == 1 ? tag[0] : -1.0f;
  NormVariant norm;
  if (code == 0.0f) norm = NormVariant::kNone;
  else if (code == 1.0f) norm = NormVariant::kRain;
  else if (code == 2.0f) norm = NormVariant::kBain;
  else throw IoError(path.string() + ": invalid meta.norm");

  ParamStore params;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw.name(i) != "meta.norm") params.add(raw.name(i), raw.tensor(i));
  }
  HarmonizerConfig config;
  config.norm = norm;
  Harmonizer net(config);
  ParamStore conformed = conform_to_layout(params, net.param_layout(), path.string());
  for (std::size_t i = 0; i < conformed.size(); ++i) {
    if (!conformed.tensor(i).all_finite()) {
      throw IoError(path.string() + ": tensor '" + conformed.name(i) + "' is not finite");
    }
  }
  return {net, std::move(conformed)};
}

// ---- manifests ---------------------------------------------------------------

std::vector<ManifestEntry> parse_manifest(std::string_view text, const fs::path& base_dir,
                                          const std::string& context) {
  std::vector<ManifestEntry> out;
  const auto lines = lines_of(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = strip_comment(lines[i]);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      fields.emplace_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (fields.size() < 2 || fields.size() > 3) {
      throw IoError(where(context, i) + ": expected 2 or 3 tab-separated fields, got " +
                    std::to_string(fields.size()));
    }
    auto resolve = [&](const std::string& f) {
      if (f.empty()) throw IoError(where(context, i) + ": empty path");
      const fs::path p(f);
      return p.is_absolute() ? p : base_dir / p;
    };
    ManifestEntry e{resolve(fields[0]), resolve(fields[1]), std::nullopt};
    if (fields.size() == 3) e.composite = resolve(fields[2]);
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  return parse_manifest(read_file(path), path.parent_path(), path.string());
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  std::string out = "# image\tmask\tcomposite\n";
  for (const ManifestEntry& e : entries) {
    out += e.image.generic_string() + "\t" + e.mask.generic_string();
    if (e.composite) out += "\t" + e.composite->generic_string();
    out += "\n";
  }
  write_file(path, out);
}

fs::path resolve_manifest(const fs::path& data) {
  std::error_code ec;
  if (fs::is_directory(data, ec)) {
    const fs::path m = data / "manifest.tsv";
    if (!fs::is_regular_file(m, ec)) throw IoError(data.string() + ": no manifest.tsv found");
    return m;
  }
  if (!fs::is_regular_file(data, ec)) throw IoError(data.string() + ": no such manifest");
  return data;
}

Sample load_sample(const ManifestEntry& entry, std::string id) {
  Sample s;
  s.real = read_ppm(entry.image);
  s.mask = read_mask(entry.mask);
  const Shape r = s.real.shape();
  if (s.mask.shape().h != r.h || s.mask.shape().w != r.w) {
    throw IoError(entry.mask.string() + ": mask is " + std::to_string(s.mask.shape().w) + "x" +
                  std::to_string(s.mask.shape().h) + " but " + entry.image.string() + " is " +
                  std::to_string(r.w) + "x" + std::to_string(r.h));
  }
  if (entry.composite) {
    s.composite = read_ppm(*entry.composite);
    if (!(s.composite.shape() == r)) {
      throw IoError(entry.composite->string() + ": composite dims differ from " +
                    entry.image.string());
    }
  } else {
    s.composite = s.real;
  }
  s.id = std::move(id);
  return s;
}

// ---- config ------------------------------------------------------------------

TrainConfig parse_config(std::string_view text, const std::string& context) {
  TrainConfig c;
  const auto lines = lines_of(text);
  std::vector<std::string> seen;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = strip_comment(lines[i]);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    const std::string at = where(context, i);
    if (eq == std::string_view::npos) throw IoError(at + ": expected key=value");
    const std::string key(strip_comment(line.substr(0, eq)));
    const std::string value(strip_comment(line.substr(eq + 1)));
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
      throw IoError(at + ": duplicate key '" + key + "'");
    }
    seen.push_back(key);
    try {
      if (key == "lr0") c.lr0 = parse_double(value, at, key);
      else if (key == "decay_factor") c.decay_factor = parse_double(value, at, key);
      else if (key == "decay_epochs") {
        c.decay_epochs.clear();
        std::string item;
        std::stringstream ss(value);
        while (std::getline(ss, item, ',')) {
          c.decay_epochs.push_back(parse_int32(std::string(strip_comment(item)), at, key));
        }
      } else if (key == "batch_size") c.batch_size = parse_int32(value, at, key);
      else if (key == "epochs") c.epochs = parse_int32(value, at, key);
      else if (key == "k" || key == "K") c.k = parse_int32(value, at, key);
      else if (key == "lambda") c.lambda = parse_double(value, at, key);
      else if (key == "seed") {
        const long long s = parse_int(value, at, key);
        if (s < 0) throw IoError(at + ": seed must be >= 0");
        c.seed = static_cast<std::uint64_t>(s);
      } else if (key == "loss") c.loss = parse_loss_variant(value);
      else if (key == "norm") c.norm = parse_norm_variant(value);
      else if (key == "triplet_margin") c.triplet_margin = parse_double(value, at, key);
      else if (key == "clip_norm") c.clip_norm = parse_double(value, at, key);
      else if (key == "heldout") c.heldout = parse_int32(value, at, key);
      else throw IoError(at + ": unknown key '" + key + "'");
    } catch (const InvalidArgument& e) {
      throw IoError(at + ": " + e.what());
    }
  }
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw IoError(context + ": " + e.what());
  }
  return c;
}

TrainConfig read_config(const fs::path& path) {
  return parse_config(read_file(path), path.string());
}

// ---- tallies -------------------------------------------------------------------

PairwiseTally parse_tally(std::string_view text, const std::string& context) {
  PairwiseTally t;
  const auto lines = lines_of(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = strip_comment(lines[i]);
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (t.methods.empty()) {
      t.methods = fields;
      continue;
    }
    if (t.wins.size() == t.methods.size()) {
      throw IoError(where(context, i) + ": more rows than methods");
    }
    if (fields.size() != t.methods.size()) {
      throw IoError(where(context, i) + ": expected " + std::to_string(t.methods.size()) +
                    " counts, got " + std::to_string(fields.size()));
    }
    std::vector<long long> row;
    for (const std::string& f : fields) row.push_back(parse_int(f, where(context, i), "count"));
    t.wins.push_back(std::move(row));
  }
  if (t.methods.empty()) throw IoError(context + ": empty tally");
  if (t.wins.size() != t.methods.size()) {
    throw IoError(context + ": expected " + std::to_string(t.methods.size()) + " rows, got " +
                  std::to_string(t.wins.size()));
  }
  try {
    t.validate();
  } catch (const InvalidArgument& e) {
    throw IoError(context + ": " + e.what());
  }
  return t;
}

PairwiseTally read_tally(const fs::path& path) {
  return parse_tally(read_file(path), path.string());
}

// ---- metric log ------------------------------------------------------------------

std::string metric_log_header() {
  return "epoch\tlr\tL_rec\tL_ss\tL_cs\theldout_PSNR\theldout_fMSE\n";
}

std::string format_metric_row(const EpochMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d\t%.6g\t%.9g\t%.9g\t%.9g\t%.6f\t%.6f\n", m.epoch, m.lr, m.rec,
                m.ss, m.cs, m.heldout_psnr, m.heldout_fmse);
  return buf;
}

}  // namespace scsco
