#ifndef FDNC_RNG_HPP
#define FDNC_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace fdnc {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives an independent stream seed from a master seed, a stage label and an index.
///
/// Streams are keyed by label rather than by draw order, so adding a stage or a shard
/// never shifts the randomness seen by another one.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                                    std::uint64_t index = 0) noexcept {
  return mix64(mix64(master ^ fnv1a(label)) + mix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t master, std::string_view label, std::uint64_t index = 0) {
  return Rng{derive_seed(master, label, index)};
}

}  // namespace fdnc

#endif
