#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>

#include "gradbal/errors.hpp"
#include "gradbal/synthdata.hpp"
#include "json.hpp"

namespace gradbal {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kManifestVersion = 1;

void put_f32(std::string& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<char>((bits >> shift) & 0xFF));
}

float get_f32(const std::string& in, std::size_t pos) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b)
    bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + b])) << (8 * b);
  return std::bit_cast<float>(bits);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

void save_dataset(const Dataset& data, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  const std::size_t h = data.spec.size, w = data.spec.size;
  json records = json::array();
  std::string blob;
  blob.reserve(data.samples.size() * h * w * 4);
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const ScanSample& s = data.samples[i];
    if (s.image.height != h || s.image.width != w)
      throw IoError("sample " + std::to_string(i) + " does not match the dataset image size");
    records.push_back({{"index", i},
                       {"subject_id", s.subject_id},
                       {"axis", s.axis},
                       {"severity", s.severity},
                       {"artifact_type", to_string(s.artifact)},
                       {"offset", blob.size()}});
    for (double p : s.image.pixels) put_f32(blob, static_cast<float>(p));
  }
  const json manifest = {{"version", kManifestVersion},
                         {"spec",
                          {{"artifact_type", to_string(data.spec.artifact)},
                           {"counts", data.spec.counts},
                           {"size", data.spec.size},
                           {"seed", data.spec.seed},
                           {"grain", data.spec.grain}}},
                         {"height", h},
                         {"width", w},
                         {"num_images", data.samples.size()},
                         {"records", records}};

  const fs::path manifest_path = dir / "manifest.json";
  std::ofstream m(manifest_path);
  if (!m) throw IoError("cannot write " + manifest_path.string());
  m << manifest.dump(2) << '\n';
  const fs::path blob_path = dir / "images.f32";
  std::ofstream b(blob_path, std::ios::binary);
  if (!b) throw IoError("cannot write " + blob_path.string());
  b.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!m || !b) throw IoError("write failed in " + dir.string());
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  const fs::path blob_path = dir / "images.f32";
  json manifest;
  try {
    manifest = json::parse(read_file(manifest_path));
  } catch (const json::exception& e) {
    throw IoError(manifest_path.string() + ": " + e.what());
  }
  const std::string blob = read_file(blob_path);

  Dataset data;
  try {
    if (manifest.at("version").get<int>() != kManifestVersion)
      throw IoError(manifest_path.string() + ": unsupported manifest version");
    const json& spec = manifest.at("spec");
    data.spec.artifact = parse_artifact(spec.at("artifact_type").get<std::string>());
    data.spec.counts = spec.at("counts").get<std::array<std::size_t, 3>>();
    data.spec.size = spec.at("size").get<std::size_t>();
    data.spec.seed = spec.at("seed").get<std::uint64_t>();
    data.spec.grain = spec.at("grain").get<double>();
    const auto h = manifest.at("height").get<std::size_t>();
    const auto w = manifest.at("width").get<std::size_t>();
    const auto n = manifest.at("num_images").get<std::size_t>();
    const json& records = manifest.at("records");
    if (records.size() != n) throw IoError(manifest_path.string() + ": record count mismatch");
    const std::size_t image_bytes = h * w * 4;
    if (blob.size() != n * image_bytes)
      throw IoError(blob_path.string() + ": expected " + std::to_string(n * image_bytes) +
                    " bytes, found " + std::to_string(blob.size()));

    data.samples.resize(n);
    for (const json& r : records) {
      const auto index = r.at("index").get<std::size_t>();
      const auto offset = r.at("offset").get<std::size_t>();
      if (index >= n || offset + image_bytes > blob.size())
        throw IoError(manifest_path.string() + ": record " + std::to_string(index) + " out of range");
      ScanSample& s = data.samples[index];
      s.subject_id = r.at("subject_id").get<std::size_t>();
      s.axis = r.at("axis").get<int>();
      s.severity = r.at("severity").get<int>();
      s.artifact = parse_artifact(r.at("artifact_type").get<std::string>());
      if (s.axis < 0 || s.axis > 2 || s.severity < 0 || s.severity > 2)
        throw IoError(manifest_path.string() + ": label out of range in record " +
                      std::to_string(index));
      s.image = Image(h, w);
      for (std::size_t p = 0; p < h * w; ++p) s.image.pixels[p] = get_f32(blob, offset + 4 * p);
    }
  } catch (const json::exception& e) {
    throw IoError(manifest_path.string() + ": " + e.what());
  } catch (const ArgumentError& e) {
    throw IoError(manifest_path.string() + ": " + e.what());
  }
  return data;
}

}  // namespace gradbal
