#pragma once

#include <span>
#include <vector>

#include "iwn/image.hpp"

namespace iwn {

enum class TransformKind { Dct, Dft };

/// One channel's transform coefficients, same shape as the source channel.
struct SpectralPlane {
  int rows = 0;
  int cols = 0;
  TransformKind kind = TransformKind::Dct;
  std::vector<double> coeffs;
};

struct EmbedConfig {
  double alpha = 0.1;  ///< embedding strength, valid range (0, 1]
};

// Orthonormal type-II DCT over the whole plane (no 8x8 blocking):
//   F(u,v) = 2/sqrt(NM) C(u) C(v) sum_x sum_y f(x,y) cos(pi(2x+1)u/2N) cos(pi(2y+1)v/2M)
// with C(0) = 1/sqrt(2), C(k>0) = 1. The inverse is the transpose.
SpectralPlane dct2(std::span<const double> channel, int rows, int cols);
std::vector<double> idct2(const SpectralPlane& plane);

/// Separable in-place-free plane transforms used by both the codec and the
/// differentiable losses. `in` and `out` are row-major `rows x cols` and must
/// not alias.
template <class T>
void dct2_plane(std::span<const T> in, int rows, int cols, std::span<T> out);
template <class T>
void idct2_plane(std::span<const T> in, int rows, int cols, std::span<T> out);

/// x_w = idct2(dct2(x) + alpha * dct2(w)) per channel, clipped to [0, 1].
/// The fraction of clipped values is logged and, if requested, returned.
Image embed(const Image& x, const Image& w, EmbedConfig cfg, double* clipped_fraction = nullptr);

/// w' = idct2((dct2(x_w) - dct2(x)) / alpha) per channel, clipped to [0, 1].
Image extract(const Image& x_w, const Image& x, EmbedConfig cfg);

/// Same as extract() but without the final clip; the losses differentiate
/// through this form.
Image extract_unclipped(const Image& x_w, const Image& x, EmbedConfig cfg);

}  // namespace iwn
