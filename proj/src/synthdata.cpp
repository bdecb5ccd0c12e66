#include "gradbal/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include "gradbal/errors.hpp"
#include "gradbal/rng.hpp"

namespace gradbal {
namespace {

constexpr std::array<std::string_view, 7> kArtifactNames{
    "noise", "zipper", "positioning", "banding", "motion", "contrast", "distortion"};

// Corruption magnitude per severity level.
constexpr std::array<double, 3> kNoiseSigma{0.0, 0.15, 0.40};
constexpr std::array<double, 3> kZipperAmplitude{0.0, 0.5, 1.0};
constexpr std::array<double, 3> kBandingAmplitude{0.0, 0.3, 0.7};
constexpr std::array<double, 3> kContrastFactor{1.0, 0.6, 0.3};
constexpr std::array<int, 3> kMotionShift{0, 2, 5};
constexpr std::array<int, 3> kPositioningShift{0, 3, 7};
constexpr std::array<double, 3> kDistortionAmplitude{0.0, 1.5, 4.0};

constexpr std::size_t kZipperPeriod = 8;
constexpr double kBandPeriod = 8.0;

double clamped(const Image& im, std::ptrdiff_t r, std::ptrdiff_t c) {
  r = std::clamp<std::ptrdiff_t>(r, 0, static_cast<std::ptrdiff_t>(im.height) - 1);
  c = std::clamp<std::ptrdiff_t>(c, 0, static_cast<std::ptrdiff_t>(im.width) - 1);
  return im.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
}

double zero_filled(const Image& im, std::ptrdiff_t r, std::ptrdiff_t c) {
  if (r < 0 || c < 0 || r >= static_cast<std::ptrdiff_t>(im.height) ||
      c >= static_cast<std::ptrdiff_t>(im.width))
    return 0.0;
  return im.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
}

std::ptrdiff_t nearest(double v) { return static_cast<std::ptrdiff_t>(std::floor(v + 0.5)); }

}  // namespace

std::string_view to_string(ArtifactType type) {
  return kArtifactNames[static_cast<std::size_t>(type)];
}

ArtifactType parse_artifact(std::string_view name) {
  for (std::size_t i = 0; i < kArtifactNames.size(); ++i)
    if (kArtifactNames[i] == name) return static_cast<ArtifactType>(i);
  throw ArgumentError("unknown artifact type: " + std::string(name));
}

DatasetSpec DatasetSpec::defaults(ArtifactType artifact) {
  DatasetSpec s;
  s.artifact = artifact;
  switch (artifact) {
    case ArtifactType::noise: s.counts = {426, 60, 46}; break;
    case ArtifactType::zipper: s.counts = {398, 105, 29}; break;
    case ArtifactType::positioning: s.counts = {470, 47, 15}; break;
    case ArtifactType::banding: s.counts = {504, 15, 13}; break;
    case ArtifactType::motion: s.counts = {384, 78, 70}; break;
    case ArtifactType::contrast: s.counts = {375, 134, 23}; break;
    case ArtifactType::distortion: s.counts = {435, 56, 41}; break;
  }
  return s;
}

void DatasetSpec::validate() const {
  if (counts[0] + counts[1] + counts[2] < 4)
    throw GeneratorError("dataset needs at least 4 scans to form two subjects");
  if (size < 8) throw GeneratorError("image size must be at least 8");
  if (!(grain >= 0.0 && grain <= 1.0)) throw GeneratorError("grain must be in [0, 1]");
}

std::vector<int> Dataset::severities() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.severity);
  return out;
}

std::vector<int> Dataset::axes() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.axis);
  return out;
}

std::size_t Dataset::num_subjects() const {
  std::set<std::size_t> ids;
  for (const auto& s : samples) ids.insert(s.subject_id);
  return ids.size();
}

Image base_pattern(std::size_t size, int axis, std::uint64_t seed, std::size_t subject_id,
                   double grain_max) {
  Stream subject(seed, "subject", subject_id);
  Stream scan(seed, "scan", subject_id * 3 + static_cast<std::size_t>(axis));
  const double n = static_cast<double>(size);
  const double cy = (n - 1) / 2 + subject.uniform(-1.5, 1.5);
  const double cx = (n - 1) / 2 + subject.uniform(-1.5, 1.5);
  const double radius = n * subject.uniform(0.22, 0.30);
  const double disc_level = subject.uniform(0.3, 0.5);

  // Faint smooth texture: a few low-frequency plane waves.
  struct Wave {
    double fy, fx, phase, amp;
  };
  std::array<Wave, 3> waves{};
  for (auto& w : waves)
    w = {scan.uniform(0.5, 3.0), scan.uniform(0.5, 3.0), scan.uniform(0.0, 2 * std::numbers::pi),
         scan.uniform(0.01, 0.03)};

  Stream grain(seed, "grain", subject_id * 3 + static_cast<std::size_t>(axis));
  const double grain_sigma = grain.uniform(0.0, grain_max);

  Image im(size, size);
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      const double v = static_cast<double>(r) / (n - 1);
      const double u = static_cast<double>(c) / (n - 1);
      double g = 0.0;
      switch (axis) {
        case 0: g = u; break;
        case 1: g = v; break;
        default: g = 0.5 * (u + v); break;
      }
      const double dy = static_cast<double>(r) - cy, dx = static_cast<double>(c) - cx;
      const double disc = dy * dy + dx * dx <= radius * radius ? disc_level : 0.0;
      double tex = 0.0;
      for (const auto& w : waves)
        tex += w.amp * std::sin(2 * std::numbers::pi * (w.fy * v + w.fx * u) + w.phase);
      im.at(r, c) = 0.2 + 0.4 * g + disc + tex + grain_sigma * grain.normal();
    }
  }
  return im;
}

Image apply_artifact(const Image& image, ArtifactType type, int severity, std::uint64_t seed) {
  if (severity < 0 || severity > 2)
    throw ArgumentError("severity must be 0, 1 or 2, got " + std::to_string(severity));
  if (static_cast<std::size_t>(type) >= kArtifactNames.size())
    throw ArgumentError("unknown artifact type");
  if (severity == 0) return image;
  const auto s = static_cast<std::size_t>(severity);
  Stream rng(seed);
  Image out = image;
  const std::size_t h = image.height, w = image.width;
  const double pi = std::numbers::pi;

  switch (type) {
    case ArtifactType::noise:
      for (double& p : out.pixels) p += kNoiseSigma[s] * rng.normal();
      break;
    case ArtifactType::zipper: {
      const std::size_t first = static_cast<std::size_t>(rng.below(kZipperPeriod));
      const double a = kZipperAmplitude[s];
      for (std::size_t r = first; r < h; r += kZipperPeriod)
        for (std::size_t c = 0; c < w; ++c) out.at(r, c) = c % 2 == 0 ? a : -a;
      break;
    }
    case ArtifactType::banding: {
      const double phase = rng.uniform(0.0, 2 * pi);
      for (std::size_t r = 0; r < h; ++r) {
        const double band =
            kBandingAmplitude[s] * std::sin(2 * pi * static_cast<double>(r) / kBandPeriod + phase);
        for (std::size_t c = 0; c < w; ++c) out.at(r, c) += band;
      }
      break;
    }
    case ArtifactType::contrast: {
      const double mean =
          std::accumulate(image.pixels.begin(), image.pixels.end(), 0.0) / image.pixels.size();
      for (double& p : out.pixels) p = mean + kContrastFactor[s] * (p - mean);
      break;
    }
    case ArtifactType::motion: {
      const bool vertical = rng.below(2) == 1;
      const std::ptrdiff_t d = kMotionShift[s];
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
          const auto ri = static_cast<std::ptrdiff_t>(r), ci = static_cast<std::ptrdiff_t>(c);
          const double fwd = vertical ? clamped(image, ri + d, ci) : clamped(image, ri, ci + d);
          const double back = vertical ? clamped(image, ri - d, ci) : clamped(image, ri, ci - d);
          out.at(r, c) = (image.at(r, c) + fwd + back) / 3.0;
        }
      break;
    }
    case ArtifactType::positioning: {
      const std::ptrdiff_t d = kPositioningShift[s];
      const std::ptrdiff_t sy = rng.below(2) == 1 ? d : -d;
      const std::ptrdiff_t sx = rng.below(2) == 1 ? d : -d;
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c)
          out.at(r, c) = zero_filled(image, static_cast<std::ptrdiff_t>(r) - sy,
                                     static_cast<std::ptrdiff_t>(c) - sx);
      break;
    }
    case ArtifactType::distortion: {
      const double a = kDistortionAmplitude[s];
      const double py = rng.uniform(0.0, 2 * pi), px = rng.uniform(0.0, 2 * pi);
      const double period = static_cast<double>(w) / 2.0;
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
          const double src_c = static_cast<double>(c) + a * std::sin(2 * pi * r / period + py);
          const double src_r = static_cast<double>(r) + a * std::sin(2 * pi * c / period + px);
          out.at(r, c) = clamped(image, nearest(src_r), nearest(src_c));
        }
      break;
    }
  }
  return out;
}

Dataset generate_dataset(const DatasetSpec& spec) {
  spec.validate();
  const std::size_t total = spec.counts[0] + spec.counts[1] + spec.counts[2];

  // Subject structure: 1-3 scans per subject on distinct axes.
  struct Slot {
    std::size_t subject;
    int axis;
  };
  std::vector<Slot> slots;
  Stream layout(spec.seed, "subjects");
  for (std::size_t subject = 0; slots.size() < total; ++subject) {
    const std::size_t scans = 1 + static_cast<std::size_t>(layout.below(3));
    std::array<int, 3> axes{0, 1, 2};
    layout.shuffle(std::span<int>(axes));
    for (std::size_t k = 0; k < scans && slots.size() < total; ++k) slots.push_back({subject, axes[k]});
  }
  if (slots.empty() || slots.front().subject == slots.back().subject)
    throw GeneratorError("counts too small to form at least two subjects");

  std::vector<int> labels;
  labels.reserve(total);
  for (int c = 0; c < 3; ++c) labels.insert(labels.end(), spec.counts[static_cast<std::size_t>(c)], c);
  Stream(spec.seed, "severity").shuffle(std::span(labels));

  Dataset data{spec, {}};
  data.samples.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    ScanSample s;
    s.subject_id = slots[i].subject;
    s.axis = slots[i].axis;
    s.severity = labels[i];
    s.artifact = spec.artifact;
    const Image base = base_pattern(spec.size, s.axis, spec.seed, s.subject_id, spec.grain);
    s.image = apply_artifact(base, spec.artifact, s.severity, derive_key(spec.seed, "artifact", i));
    for (double& p : s.image.pixels) p = static_cast<double>(static_cast<float>(p));
    data.samples.push_back(std::move(s));
  }
  return data;
}

std::vector<std::size_t> SplitManifest::train_indices(const Dataset& data) const {
  const std::set<std::size_t> ids(train_subjects.begin(), train_subjects.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < data.samples.size(); ++i)
    if (ids.contains(data.samples[i].subject_id)) out.push_back(i);
  return out;
}

std::vector<std::size_t> SplitManifest::val_indices(const Dataset& data) const {
  const std::set<std::size_t> ids(val_subjects.begin(), val_subjects.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < data.samples.size(); ++i)
    if (ids.contains(data.samples[i].subject_id)) out.push_back(i);
  return out;
}

SplitManifest split_by_subject(const Dataset& data, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw SplitError("split ratio must be in (0, 1)");
  std::set<std::size_t> unique;
  for (const auto& s : data.samples) unique.insert(s.subject_id);
  if (unique.size() < 2) throw SplitError("need at least two subjects to split");
  std::vector<std::size_t> ids(unique.begin(), unique.end());
  Stream(seed, "split").shuffle(std::span(ids));

  const auto count = static_cast<double>(ids.size());
  auto n_train = static_cast<std::size_t>(std::ceil(ratio * count - 1e-9));
  n_train = std::clamp<std::size_t>(n_train, 1, ids.size() - 1);

  SplitManifest m;
  m.ratio = ratio;
  m.train_subjects.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  m.val_subjects.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  std::sort(m.train_subjects.begin(), m.train_subjects.end());
  std::sort(m.val_subjects.begin(), m.val_subjects.end());
  return m;
}

Image normalize(const Image& image) {
  const double n = static_cast<double>(image.pixels.size());
  double mean = 0.0;
  for (double p : image.pixels) mean += p;
  mean /= n;
  double var = 0.0;
  for (double p : image.pixels) var += (p - mean) * (p - mean);
  var /= n;
  const double inv = 1.0 / std::sqrt(std::max(var, 1e-8));
  Image out = image;
  for (double& p : out.pixels) p = (p - mean) * inv;
  return out;
}

Image center_crop(const Image& image, std::size_t crop) {
  if (image.height < crop || image.width < crop)
    throw ConfigError("image " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                      " is smaller than crop " + std::to_string(crop));
  const std::size_t top = (image.height - crop) / 2, left = (image.width - crop) / 2;
  Image out(crop, crop);
  for (std::size_t r = 0; r < crop; ++r)
    for (std::size_t c = 0; c < crop; ++c) out.at(r, c) = image.at(top + r, left + c);
  return out;
}

Image rotate(const Image& image, double degrees) {
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  const double cy = (static_cast<double>(image.height) - 1) / 2;
  const double cx = (static_cast<double>(image.width) - 1) / 2;
  Image out(image.height, image.width);
  for (std::size_t r = 0; r < image.height; ++r)
    for (std::size_t c = 0; c < image.width; ++c) {
      // Inverse map: output pixel -> source pixel rotated by -theta.
      const double y = static_cast<double>(r) - cy, x = static_cast<double>(c) - cx;
      const double sy = cs * y - sn * x + cy;
      const double sx = sn * y + cs * x + cx;
      out.at(r, c) = zero_filled(image, nearest(sy), nearest(sx));
    }
  return out;
}

double rotation_angle(std::uint64_t seed) { return Stream(seed, "rotation").uniform(-180.0, 180.0); }

Image augment_with_angle(const Image& image, std::optional<double> degrees, std::size_t crop) {
  Image out = center_crop(normalize(image), crop);
  if (degrees) out = rotate(out, *degrees);
  return out;
}

Image augment(const Image& image, bool rotation_enabled, std::uint64_t seed, std::size_t crop) {
  return augment_with_angle(image,
                            rotation_enabled ? std::optional<double>(rotation_angle(seed))
                                             : std::nullopt,
                            crop);
}

}  // namespace gradbal
