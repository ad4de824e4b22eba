#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace zsner {

/// Seeded generator whose output is identical on every platform.
///
/// std::mt19937_64 itself is fully specified; the standard distributions and
/// std::shuffle are not, so bounded draws and shuffling are done here.
class DeterministicRng {
 public:
  explicit DeterministicRng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream derived from a base seed and a label (e.g. a tag).
  static DeterministicRng for_stream(std::uint64_t seed, std::string_view label);

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). `bound` must be positive.
  std::uint64_t below(std::uint64_t bound);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace zsner
