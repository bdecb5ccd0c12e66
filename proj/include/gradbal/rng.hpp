#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace gradbal {

/// Derives a 64-bit stream key from a root seed, a fixed label and an index
/// (epoch, sample number, ...). Distinct labels give statistically
/// independent streams, so toggling one consumer never shifts another.
std::uint64_t derive_key(std::uint64_t seed, std::string_view label, std::uint64_t index = 0);

/// Counter-based generator: draw n is mix(key + (n + 1) * golden), i.e. a
/// pure function of (key, n). Distributions are implemented here rather than
/// taken from <random> so that sequences are identical across standard
/// libraries.
class Stream {
 public:
  explicit Stream(std::uint64_t key) : key_(key) {}
  Stream(std::uint64_t seed, std::string_view label, std::uint64_t index = 0)
      : key_(derive_key(seed, label, index)) {}

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller (one value per call, no caching).
  double normal();
  /// Unbiased integer in [0, n); throws ArgumentError for n == 0.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace gradbal
