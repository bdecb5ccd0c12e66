#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gradbal {

enum class ArtifactType { noise, zipper, positioning, banding, motion, contrast, distortion };

inline constexpr std::array<ArtifactType, 7> kAllArtifacts{
    ArtifactType::noise,  ArtifactType::zipper,   ArtifactType::positioning,
    ArtifactType::banding, ArtifactType::motion,  ArtifactType::contrast,
    ArtifactType::distortion};

std::string_view to_string(ArtifactType type);
/// Throws ArgumentError for unknown names.
ArtifactType parse_artifact(std::string_view name);

/// Single-channel image, row-major.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), pixels(h * w, fill) {}
  double& at(std::size_t r, std::size_t c) { return pixels[r * width + c]; }
  double at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }

  friend bool operator==(const Image&, const Image&) = default;
};

struct ScanSample {
  Image image;
  int severity = 0;
  int axis = 0;
  std::size_t subject_id = 0;
  ArtifactType artifact = ArtifactType::noise;

  friend bool operator==(const ScanSample&, const ScanSample&) = default;
};

/// Upper bound of the per-scan grain sigma in clean images.
inline constexpr double kDefaultGrain = 0.2;

struct DatasetSpec {
  ArtifactType artifact = ArtifactType::noise;
  std::array<std::size_t, 3> counts{426, 60, 46};
  std::size_t size = 32;
  std::uint64_t seed = 0;
  double grain = kDefaultGrain;

  /// Severity distribution of the real challenge data for this artifact,
  /// before simulation.
  static DatasetSpec defaults(ArtifactType artifact);
  /// Throws GeneratorError.
  void validate() const;

  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

struct Dataset {
  DatasetSpec spec;
  std::vector<ScanSample> samples;

  std::vector<int> severities() const;
  std::vector<int> axes() const;
  std::size_t num_subjects() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Orientation-coded smooth pattern for one (subject, axis) pair: a gradient
/// whose direction encodes the axis, a centered disc, a faint texture and
/// per-scan Gaussian grain with sigma drawn uniformly from [0, grain_max].
Image base_pattern(std::size_t size, int axis, std::uint64_t seed, std::size_t subject_id,
                   double grain_max = kDefaultGrain);

/// Graded toy corruption; severity 0 returns the input unchanged. Throws
/// ArgumentError on severity outside {0, 1, 2}.
Image apply_artifact(const Image& image, ArtifactType type, int severity, std::uint64_t seed);

/// Subjects with 1-3 scans on distinct axes, severity counts matching the
/// spec exactly. Pixels are rounded to float precision so the on-disk format
/// is lossless.
Dataset generate_dataset(const DatasetSpec& spec);

struct SplitManifest {
  std::vector<std::size_t> train_subjects;
  std::vector<std::size_t> val_subjects;
  double ratio = 0.8;

  /// Sample positions whose subject is in the given partition.
  std::vector<std::size_t> train_indices(const Dataset& data) const;
  std::vector<std::size_t> val_indices(const Dataset& data) const;
};

/// Seeded subject permutation; the first ceil(ratio * S) subjects train.
/// Both partitions are kept non-empty. Throws SplitError for < 2 subjects.
SplitManifest split_by_subject(const Dataset& data, double ratio, std::uint64_t seed);

/// Zero mean, unit variance (variance clamped at 1e-8).
Image normalize(const Image& image);
Image center_crop(const Image& image, std::size_t crop);
/// Rotation about the image center, nearest neighbour, zero fill.
Image rotate(const Image& image, double degrees);

/// Seeded angle uniform in [-180, 180).
double rotation_angle(std::uint64_t seed);

/// normalize -> center crop -> (optional) rotation by rotation_angle(seed).
/// Throws ConfigError when the image is smaller than the crop.
Image augment(const Image& image, bool rotation_enabled, std::uint64_t seed,
              std::size_t crop = 28);
/// Same pipeline with an explicit angle (nullopt = no rotation).
Image augment_with_angle(const Image& image, std::optional<double> degrees, std::size_t crop = 28);

/// Writes manifest.json + images.f32 (little-endian float32, row-major).
void save_dataset(const Dataset& data, const std::filesystem::path& dir);
/// Throws IoError on missing files, malformed manifest or blob length
/// mismatch.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace gradbal
