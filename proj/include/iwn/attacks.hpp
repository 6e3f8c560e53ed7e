#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "iwn/image.hpp"

namespace iwn {

enum class AttackKind { Mosaic, GaussianNoise, SaltPepper, JpegCompress, GaussianFilter };

inline constexpr std::array<AttackKind, 5> kAllAttacks{
    AttackKind::Mosaic, AttackKind::GaussianNoise, AttackKind::SaltPepper, AttackKind::JpegCompress,
    AttackKind::GaussianFilter};

std::string_view to_string(AttackKind kind);
std::optional<AttackKind> parse_attack_kind(std::string_view name);

/// Parameters for every kind; only the fields relevant to `kind` are read.
/// Defaults are the severities used throughout training and evaluation.
struct AttackParams {
  // Mosaic: pixelate a random region covering `region_fraction` of the image.
  double region_fraction = 0.5;
  int mosaic_block = 8;
  bool contiguous_region = true;  ///< false: scatter whole blocks instead of one rectangle
  // Gaussian noise, in normalized [0,1] pixel units.
  double noise_std = 0.5;
  double noise_mean = 0.0;
  // Salt and pepper: `sp_amount` of pixels are corrupted, each salt with probability `sp_ratio`.
  double sp_ratio = 0.5;
  double sp_amount = 0.15;
  // Baseline JPEG round trip.
  int jpeg_quality = 1;
  // Gaussian blur, repeated.
  int kernel_size = 3;
  double sigma = 1.0;
  int repeats = 3;
};

struct AttackSpec {
  AttackKind kind = AttackKind::GaussianNoise;
  AttackParams params{};
  std::uint64_t seed = 0;

  /// Spec with the default severities for `kind`.
  static AttackSpec standard(AttackKind kind, std::uint64_t seed) { return {kind, AttackParams{}, seed}; }
};

/// Pure function of (img, spec): the same inputs give bit-identical output.
/// The result is clipped to [0, 1].
Image apply_attack(const Image& img, const AttackSpec& spec);

/// Uniformly picks a kind from `pool` and derives a fresh attack seed, both
/// deterministically from `rng_seed`. Throws EmptyPool.
AttackSpec sample_attack(std::span<const AttackKind> pool, std::uint64_t rng_seed);

}  // namespace iwn
