#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace synthpar {

/// Portable random source. std::mt19937_64's output sequence is fixed by the
/// standard, but the std distributions are not, so bounded draws are done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  /// Uniform double in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// k distinct indices from [0, n) in draw order (partial Fisher-Yates:
  /// for i in [0,k): j = i + below(n - i); swap(idx[i], idx[j])).
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
};

}  // namespace synthpar
