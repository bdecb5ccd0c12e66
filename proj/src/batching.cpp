#include "gradbal/batching.hpp"

#include <numeric>

#include "gradbal/errors.hpp"
#include "gradbal/rng.hpp"

namespace gradbal {

ClassIndexSets ClassIndexSets::from_labels(std::span<const int> labels,
                                           std::span<const std::size_t> positions) {
  ClassIndexSets sets;
  for (std::size_t p : positions) {
    const int y = labels[p];
    if (y < 0 || y > 2) throw SamplerError("severity label outside [0, 3)");
    sets.indices[static_cast<std::size_t>(y)].push_back(p);
  }
  return sets;
}

std::size_t BatchPlan::total_indices() const {
  std::size_t n = 0;
  for (const auto& b : batches) n += b.size();
  return n;
}

BatchPlan standard_epoch(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                         std::uint64_t epoch) {
  if (n == 0 || batch_size == 0) throw SamplerError("standard_epoch: n and batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Stream(seed, "sampler.standard", epoch).shuffle(std::span(order));
  BatchPlan plan{{}, epoch, seed};
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    plan.batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                              order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return plan;
}

std::vector<std::size_t> upsample_class2(std::span<const std::size_t> class2, std::size_t target,
                                         std::uint64_t seed, std::uint64_t epoch) {
  if (class2.empty()) throw SamplerError("upsample_class2: class 2 has no samples");
  Stream rng(seed, "sampler.upsample", epoch);
  const std::size_t n2 = class2.size();
  std::vector<std::size_t> out;
  out.reserve(target);
  for (std::size_t copy = 0; copy < target / n2; ++copy)
    out.insert(out.end(), class2.begin(), class2.end());
  // Remainder: prefix of a seeded permutation = sample without replacement.
  std::vector<std::size_t> pool(class2.begin(), class2.end());
  rng.shuffle(std::span(pool));
  out.insert(out.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(target % n2));
  rng.shuffle(std::span(out));
  return out;
}

std::size_t rotating_offset(std::uint64_t epoch, std::size_t draw, std::size_t draws_per_epoch,
                            std::size_t n0) {
  // Reduce before multiplying so long runs cannot overflow.
  const std::uint64_t start = (epoch % n0) * (draws_per_epoch % n0) % n0;
  return static_cast<std::size_t>((start + draw % n0) % n0);
}

BatchPlan rotating_epoch(const ClassIndexSets& sets, std::uint64_t seed, std::uint64_t epoch) {
  for (std::size_t c = 0; c < 3; ++c)
    if (sets.indices[c].empty())
      throw SamplerError("rotating_epoch: class " + std::to_string(c) + " has no samples");
  const std::size_t n0 = sets.size(0);
  const std::size_t n1 = sets.size(1);

  std::vector<std::size_t> base0 = sets.indices[0];
  Stream(seed, "sampler.class0_base").shuffle(std::span(base0));

  std::vector<std::size_t> order1 = sets.indices[1];
  Stream(seed, "sampler.class1", epoch).shuffle(std::span(order1));

  const std::vector<std::size_t> order2 = upsample_class2(sets.indices[2], n1, seed, epoch);

  const std::size_t draws = 2 * n1;
  BatchPlan plan{{}, epoch, seed};
  plan.batches.reserve(n1);
  for (std::size_t b = 0; b < n1; ++b) {
    plan.batches.push_back({base0[rotating_offset(epoch, 2 * b, draws, n0)],
                            base0[rotating_offset(epoch, 2 * b + 1, draws, n0)], order1[b],
                            order2[b]});
  }
  return plan;
}

}  // namespace gradbal
