#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace gradbal {

inline constexpr std::size_t kRotatingBatchSize = 4;

/// Dataset indices per severity class.
struct ClassIndexSets {
  std::array<std::vector<std::size_t>, 3> indices;

  std::size_t size(std::size_t c) const { return indices.at(c).size(); }
  /// Groups `positions` (dataset indices) by their label.
  static ClassIndexSets from_labels(std::span<const int> labels,
                                    std::span<const std::size_t> positions);
};

struct BatchPlan {
  std::vector<std::vector<std::size_t>> batches;
  std::uint64_t epoch = 0;
  std::uint64_t seed = 0;

  std::size_t total_indices() const;
};

/// Seeded permutation of 0..n-1 chunked into batches; the final partial
/// batch is kept.
BatchPlan standard_epoch(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                         std::uint64_t epoch);

/// `target` class-2 indices: floor(target/N2) full copies plus a seeded
/// without-replacement sample of the remainder, shuffled. Throws SamplerError
/// on an empty set.
std::vector<std::size_t> upsample_class2(std::span<const std::size_t> class2, std::size_t target,
                                         std::uint64_t seed, std::uint64_t epoch);

/// Position in the fixed class-0 base order used by class-0 draw j of epoch
/// e: (e * draws_per_epoch + j) mod n0.
std::size_t rotating_offset(std::uint64_t epoch, std::size_t draw, std::size_t draws_per_epoch,
                            std::size_t n0);

/// N1 batches of [c0, c0, c1, c2]. Class-0 indices come from a rotating
/// buffer over a once-shuffled base order, continuing where the previous
/// epoch stopped. Throws SamplerError when any class is empty.
BatchPlan rotating_epoch(const ClassIndexSets& sets, std::uint64_t seed, std::uint64_t epoch);

}  // namespace gradbal
