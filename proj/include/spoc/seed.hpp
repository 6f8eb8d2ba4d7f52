#pragma once

#include <cstdint>
#include <string_view>

namespace spoc {

/// Derives an independent stream seed from a base seed and a stream name.
/// The scheme is splitmix64(base ^ fnv1a64(stream)); it is echoed in every
/// run manifest so stages can be reproduced in isolation.
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t base, std::string_view stream) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : stream) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  std::uint64_t z = base ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
  std::uint64_t z = base + (index + 1) * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::string_view kSeedDerivation = "splitmix64(seed ^ fnv1a64(stream))";

}  // namespace spoc
