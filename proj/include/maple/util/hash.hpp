#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace maple::util {

// 128-bit FNV-1a. Stable across platforms and runs; rendered as 32 lowercase
// hex chars. Used for state identity, replay keys and content digests.
struct Digest128 {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  bool operator==(const Digest128&) const = default;
};

Digest128 fnv1a128(std::string_view bytes);

// 32-char lowercase hex rendering of a 128-bit digest.
std::string to_hex32(const Digest128& d);

inline std::string digest_hex(std::string_view bytes) {
  return to_hex32(fnv1a128(bytes));
}

}  // namespace maple::util
