#include "synthpar/hashing.hpp"

#include <openssl/evp.h>

#include <stdexcept>

#include "synthpar/errors.hpp"

namespace synthpar {

namespace {

std::uint64_t load_be64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | p[i];
  return v;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

std::array<std::uint8_t, 32> sha256(std::string_view data) {
  std::array<std::uint8_t, 32> out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(),
                 nullptr) != 1 ||
      len != out.size()) {
    throw std::runtime_error("sha256 digest failed");
  }
  return out;
}

Hash128 hash128(std::string_view data) {
  const auto digest = sha256(data);
  return Hash128{load_be64(digest.data()), load_be64(digest.data() + 8)};
}

std::string Hash128::hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(32, '0');
  for (int i = 0; i < 16; ++i) {
    s[15 - i] = kDigits[(hi >> (4 * i)) & 0xf];
    s[31 - i] = kDigits[(lo >> (4 * i)) & 0xf];
  }
  return s;
}

Hash128 Hash128::from_hex(std::string_view hex) {
  if (hex.size() != 32) throw ParseError("hash must be 32 hex digits: " + std::string(hex));
  Hash128 h;
  for (std::size_t i = 0; i < 32; ++i) {
    const int v = hex_value(hex[i]);
    if (v < 0) throw ParseError("invalid hex digit in hash: " + std::string(hex));
    auto& word = i < 16 ? h.hi : h.lo;
    word = (word << 4) | static_cast<std::uint64_t>(v);
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view scope,
                          std::uint64_t index) {
  std::string key = std::to_string(master);
  key += '\x1f';
  key += scope;
  key += '\x1f';
  key += std::to_string(index);
  return hash128(key).hi;
}

}  // namespace synthpar
