#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace synthpar {

/// 128-bit content hash (truncated SHA-256). Used for stable record ids and
/// config fingerprints.
struct Hash128 {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  std::string hex() const;
  static Hash128 from_hex(std::string_view hex);

  friend bool operator==(const Hash128&, const Hash128&) = default;
  friend auto operator<=>(const Hash128&, const Hash128&) = default;
};

Hash128 hash128(std::string_view data);

std::array<std::uint8_t, 32> sha256(std::string_view data);

/// FNV-1a, 64 bit. Fast and stable across platforms; used for n-gram keys.
constexpr std::uint64_t fnv1a64(std::string_view data,
                                std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives a 64-bit seed from a master seed plus a scope label and an index.
/// All randomness in a run flows through this function.
std::uint64_t derive_seed(std::uint64_t master, std::string_view scope,
                          std::uint64_t index = 0);

}  // namespace synthpar
