#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <openssl/sha.h>

#include "pits/errors.hpp"

namespace pits {

enum class HashId : uint8_t { sha256 = 1 };

inline constexpr std::size_t kDigestSize = 32;
inline constexpr std::size_t kDigestBits = kDigestSize * 8;

/// Raw SHA-256 digest; doubles as the node value type of the tree.
struct Digest {
  std::array<uint8_t, kDigestSize> bytes{};

  auto operator<=>(const Digest&) const = default;

  /// Bit `pos` of the digest, MSB-first within each byte
  /// (pos 0 is the top bit of bytes[0]).
  bool bit(std::size_t pos) const {
    return (bytes[pos >> 3] >> (7 - (pos & 7))) & 1u;
  }

  std::string hex() const {
    static constexpr char tab[] = "0123456789abcdef";
    std::string out(2 * kDigestSize, '0');
    for (std::size_t i = 0; i < kDigestSize; ++i) {
      out[2 * i] = tab[bytes[i] >> 4];
      out[2 * i + 1] = tab[bytes[i] & 0xf];
    }
    return out;
  }

  static std::optional<Digest> from_hex(std::string_view s) {
    if (s.size() != 2 * kDigestSize) return std::nullopt;
    Digest d;
    for (std::size_t i = 0; i < kDigestSize; ++i) {
      int hi = hex_nibble(s[2 * i]);
      int lo = hex_nibble(s[2 * i + 1]);
      if (hi < 0 || lo < 0) return std::nullopt;
      d.bytes[i] = static_cast<uint8_t>((hi << 4) | lo);
    }
    return d;
  }

 private:
  static int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
  }
};

struct DigestHash {
  std::size_t operator()(const Digest& d) const noexcept {
    std::size_t v;
    std::memcpy(&v, d.bytes.data(), sizeof v);
    return v;
  }
};

// The direct SHA256_* interface is deprecated in OpenSSL 3 in favor of EVP,
// but EVP's per-call fetch overhead costs ~4x on the 32/64-byte messages
// this tree hashes by the million.
#pragma GCC diagnostic push
#pragma GCC diagnostic ignored "-Wdeprecated-declarations"

inline Digest sha256(std::span<const uint8_t> data) {
  Digest out;
  SHA256_CTX ctx;
  SHA256_Init(&ctx);
  if (!data.empty()) SHA256_Update(&ctx, data.data(), data.size());
  SHA256_Final(out.bytes.data(), &ctx);
  return out;
}

#pragma GCC diagnostic pop

inline Digest sha256(std::string_view s) {
  return sha256(std::span<const uint8_t>(
      reinterpret_cast<const uint8_t*>(s.data()), s.size()));
}

/// H(left || right); the inner-node rule of the tree.
inline Digest sha256_pair(const Digest& left, const Digest& right) {
  std::array<uint8_t, 2 * kDigestSize> buf;
  std::memcpy(buf.data(), left.bytes.data(), kDigestSize);
  std::memcpy(buf.data() + kDigestSize, right.bytes.data(), kDigestSize);
  return sha256(std::span<const uint8_t>(buf));
}

inline Digest parse_digest(std::string_view hex) {
  auto d = Digest::from_hex(hex);
  if (!d) fail(Err::malformed_batch, "bad digest hex");
  return *d;
}

}  // namespace pits
