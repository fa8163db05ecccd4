#include "maple/util/hash.hpp"

namespace maple::util {

namespace {

using u128 = unsigned __int128;

constexpr u128 make_u128(std::uint64_t hi, std::uint64_t lo) {
  return (static_cast<u128>(hi) << 64) | lo;
}

// FNV-1a 128-bit offset basis and prime.
constexpr u128 kOffset = make_u128(0x6c62272e07bb0142ULL, 0x62b821756295c58dULL);
constexpr u128 kPrime = make_u128(0x0000000001000000ULL, 0x000000000000013bULL);

}  // namespace

Digest128 fnv1a128(std::string_view bytes) {
  u128 h = kOffset;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kPrime;
  }
  return Digest128{static_cast<std::uint64_t>(h >> 64),
                   static_cast<std::uint64_t>(h)};
}

std::string to_hex32(const Digest128& d) {
  static const char* hex = "0123456789abcdef";
  std::string out(32, '0');
  std::uint64_t parts[2] = {d.hi, d.lo};
  for (int p = 0; p < 2; ++p) {
    for (int i = 0; i < 16; ++i) {
      out[p * 16 + i] = hex[(parts[p] >> ((15 - i) * 4)) & 0xF];
    }
  }
  return out;
}

}  // namespace maple::util
