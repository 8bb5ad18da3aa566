#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "scsco/composites.hpp"
#include "scsco/harmonizer.hpp"
#include "scsco/metrics.hpp"
#include "scsco/trainer.hpp"

namespace scsco {

// Unreadable, missing or malformed files. Messages always name the file.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

// Binary PPM (P6) and PGM (P5), maxval 255. Samples map to v / 255 on read;
// on write, values are clamped to [0, 1] and rounded to the nearest byte, so
// decode followed by encode reproduces the input bytes exactly (modulo header
// comments and whitespace, which are normalised).
std::string encode_ppm(const Tensor& image);
Tensor decode_ppm(std::string_view bytes, const std::string& context);
std::string encode_pgm(const Tensor& gray);
Tensor decode_pgm(std::string_view bytes, const std::string& context);

Tensor read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Tensor& image);
Tensor read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Tensor& gray);

// Masks are PGM files; a sample >= 128 is foreground. Written as 0 / 255.
Tensor read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const Tensor& mask);

// Checkpoint: "SCSC", u32 version, then records until end of file, each
// u32 name length, name bytes, u32 rank, u32 dims, f32 payload. All
// little-endian. Tensors are written with rank 4.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const ParamStore& store);
ParamStore decode_checkpoint(std::string_view bytes, const std::string& context);
void save_checkpoint(const std::filesystem::path& path, const ParamStore& store);
ParamStore read_checkpoint(const std::filesystem::path& path);

// Values from `loaded` rearranged into the order of `layout`. Unknown,
// missing or mis-shaped names are errors.
ParamStore conform_to_layout(const ParamStore& loaded, const ParamStore& layout,
                             const std::string& context);

// A harmonizer checkpoint carries its parameters plus "meta.norm".
struct HarmonizerModel {
  Harmonizer net;
  ParamStore params;
};

void save_harmonizer(const std::filesystem::path& path, const Harmonizer& net,
                     const ParamStore& params);
HarmonizerModel load_harmonizer(const std::filesystem::path& path);

// Manifest: tab-separated "image<TAB>mask[<TAB>composite]" per line, '#'
// starts a comment. Relative paths resolve against the manifest's directory.
struct ManifestEntry {
  std::filesystem::path image;
  std::filesystem::path mask;
  std::optional<std::filesystem::path> composite;
};

std::vector<ManifestEntry> parse_manifest(std::string_view text,
                                          const std::filesystem::path& base_dir,
                                          const std::string& context);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
// Paths are written as given.
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

// `data` is a manifest file or a directory holding manifest.tsv.
std::filesystem::path resolve_manifest(const std::filesystem::path& data);

// Reads one record. Without a composite column the real image doubles as the
// composite. Dimension mismatches name the offending files.
Sample load_sample(const ManifestEntry& entry, std::string id);

// Config: key=value lines, '#' comments, unknown keys rejected.
TrainConfig parse_config(std::string_view text, const std::string& context);
TrainConfig read_config(const std::filesystem::path& path);

// Tally: a line of method names, then one row of win counts per method.
// Fields are separated by tabs or spaces; '#' comments.
PairwiseTally parse_tally(std::string_view text, const std::string& context);
PairwiseTally read_tally(const std::filesystem::path& path);

// Metric log, one row per epoch.
std::string metric_log_header();
std::string format_metric_row(const EpochMetrics& m);

}  // namespace scsco
