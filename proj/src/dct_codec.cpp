#include "iwn/dct_codec.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <spdlog/spdlog.h>

#include "iwn/error.hpp"

namespace iwn {
namespace {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Row u of the basis holds sqrt(2/n) C(u) cos(pi (2x+1) u / 2n).
template <class T>
const Matrix<T>& dct_basis(int n) {
  static std::mutex mutex;
  static std::map<int, Matrix<T>> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  Matrix<double> basis(n, n);
  const double scale = std::sqrt(2.0 / n);
  for (int u = 0; u < n; ++u) {
    const double cu = u == 0 ? 1.0 / std::numbers::sqrt2 : 1.0;
    for (int x = 0; x < n; ++x) {
      basis(u, x) = scale * cu * std::cos(std::numbers::pi * (2.0 * x + 1.0) * u / (2.0 * n));
    }
  }
  return cache.emplace(n, basis.template cast<T>()).first->second;
}

void check_plane(std::size_t size, int rows, int cols) {
  if (rows < 1 || cols < 1 || size != static_cast<std::size_t>(rows) * cols) {
    throw Error(ErrorKind::ShapeMismatch, "plane size does not match rows x cols");
  }
}

Image transform_channels(const Image& x_w, const Image& x, EmbedConfig cfg) {
  require_same_shape(x_w, x, "extract");
  if (cfg.alpha == 0.0) throw Error(ErrorKind::ZeroStrength, "alpha must be non-zero for extraction");
  const int rows = x.height();
  const int cols = x.width();
  Image out(rows, cols, x.channels());
  std::vector<double> coeffs(x.plane_size());
  std::vector<double> fw(x.plane_size()), fx(x.plane_size());
  for (int c = 0; c < x.channels(); ++c) {
    auto pw = x_w.plane(c);
    auto px = x.plane(c);
    // dct2 is linear, so dct2(x_w) - dct2(x) == dct2(x_w - x) up to rounding.
    // Keep the two transforms separate to follow the extraction rule literally.
    dct2_plane<double>(pw, rows, cols, fw);
    dct2_plane<double>(px, rows, cols, fx);
    for (std::size_t i = 0; i < coeffs.size(); ++i) coeffs[i] = (fw[i] - fx[i]) / cfg.alpha;
    idct2_plane<double>(coeffs, rows, cols, out.plane(c));
  }
  return out;
}

}  // namespace

template <class T>
void dct2_plane(std::span<const T> in, int rows, int cols, std::span<T> out) {
  check_plane(in.size(), rows, cols);
  check_plane(out.size(), rows, cols);
  const auto& dr = dct_basis<T>(rows);
  const auto& dc = dct_basis<T>(cols);
  Eigen::Map<const Matrix<T>> f(in.data(), rows, cols);
  Eigen::Map<Matrix<T>> F(out.data(), rows, cols);
  Matrix<T> tmp = dr * f;
  F.noalias() = tmp * dc.transpose();
}

template <class T>
void idct2_plane(std::span<const T> in, int rows, int cols, std::span<T> out) {
  check_plane(in.size(), rows, cols);
  check_plane(out.size(), rows, cols);
  const auto& dr = dct_basis<T>(rows);
  const auto& dc = dct_basis<T>(cols);
  Eigen::Map<const Matrix<T>> F(in.data(), rows, cols);
  Eigen::Map<Matrix<T>> f(out.data(), rows, cols);
  Matrix<T> tmp = dr.transpose() * F;
  f.noalias() = tmp * dc;
}

template void dct2_plane<float>(std::span<const float>, int, int, std::span<float>);
template void dct2_plane<double>(std::span<const double>, int, int, std::span<double>);
template void idct2_plane<float>(std::span<const float>, int, int, std::span<float>);
template void idct2_plane<double>(std::span<const double>, int, int, std::span<double>);

SpectralPlane dct2(std::span<const double> channel, int rows, int cols) {
  check_plane(channel.size(), rows, cols);
  SpectralPlane plane{rows, cols, TransformKind::Dct, std::vector<double>(channel.size())};
  dct2_plane<double>(channel, rows, cols, plane.coeffs);
  return plane;
}

std::vector<double> idct2(const SpectralPlane& plane) {
  if (plane.kind != TransformKind::Dct) {
    throw Error(ErrorKind::WrongTransformKind, "idct2 requires a DCT plane");
  }
  std::vector<double> out(plane.coeffs.size());
  idct2_plane<double>(plane.coeffs, plane.rows, plane.cols, out);
  return out;
}

Image embed(const Image& x, const Image& w, EmbedConfig cfg, double* clipped_fraction) {
  require_same_shape(x, w, "embed");
  const int rows = x.height();
  const int cols = x.width();
  Image out(rows, cols, x.channels());
  std::vector<double> fx(x.plane_size()), fw(x.plane_size());
  for (int c = 0; c < x.channels(); ++c) {
    dct2_plane<double>(x.plane(c), rows, cols, fx);
    dct2_plane<double>(w.plane(c), rows, cols, fw);
    for (std::size_t i = 0; i < fx.size(); ++i) fx[i] += cfg.alpha * fw[i];
    idct2_plane<double>(fx, rows, cols, out.plane(c));
  }
  const std::size_t clipped = out.clip();
  const double fraction = out.size() ? static_cast<double>(clipped) / out.size() : 0.0;
  if (clipped > 0) spdlog::debug("embed: clipped {:.4f}% of values", 100.0 * fraction);
  if (clipped_fraction) *clipped_fraction = fraction;
  return out;
}

Image extract_unclipped(const Image& x_w, const Image& x, EmbedConfig cfg) {
  return transform_channels(x_w, x, cfg);
}

Image extract(const Image& x_w, const Image& x, EmbedConfig cfg) {
  Image out = transform_channels(x_w, x, cfg);
  out.clip();
  return out;
}

}  // namespace iwn
