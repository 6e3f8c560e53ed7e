#pragma once

#include <cstdint>
#include <initializer_list>

namespace iwn {

/// SplitMix64 finalizer. Used to derive independent stream seeds from a master
/// seed so that every random decision is a pure function of (master, labels).
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> labels) noexcept {
  std::uint64_t h = mix64(master);
  for (auto label : labels) h = mix64(h ^ mix64(label + 0x632be59bd9b4e019ULL));
  return h;
}

// Stream labels.
inline constexpr std::uint64_t kInitStream = 1;
inline constexpr std::uint64_t kAttackStream = 2;

}  // namespace iwn
