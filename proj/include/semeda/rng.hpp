#pragma once

#include <cstdint>

namespace semeda {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent seed for (stream, a, b) under a run seed, so per-sample
/// draws do not depend on the order samples are visited in.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t a = 0,
                                    std::uint64_t b = 0) {
  return mix64(mix64(mix64(mix64(seed) ^ stream) ^ a) ^ b);
}

namespace streams {
inline constexpr std::uint64_t dataset = 0x64617461;
inline constexpr std::uint64_t perturb = 0x70657274;
inline constexpr std::uint64_t shuffle = 0x73687566;
inline constexpr std::uint64_t augment = 0x6175676d;
inline constexpr std::uint64_t init = 0x696e6974;
inline constexpr std::uint64_t gradcheck = 0x67726164;
}  // namespace streams

}  // namespace semeda
