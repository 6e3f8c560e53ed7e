#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace iwn {

/// Planar (channel-major) image with values nominally in [0, 1].
///
/// Storage is `channels` consecutive `height x width` row-major planes. All
/// pipeline stages exchange this type; 8-bit conversion only happens at file
/// boundaries.
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t plane_size() const noexcept { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }

  double& at(int c, int y, int x) { return pixels_[index(c, y, x)]; }
  double at(int c, int y, int x) const { return pixels_[index(c, y, x)]; }

  std::span<double> plane(int c);
  std::span<const double> plane(int c) const;
  std::span<double> pixels() noexcept { return pixels_; }
  std::span<const double> pixels() const noexcept { return pixels_; }

  bool same_shape(const Image& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  /// Clamps every value into [0, 1]; returns how many values were changed.
  std::size_t clip();

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int c, int y, int x) const noexcept {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> pixels_;
};

/// Throws ShapeMismatch unless both images have identical dimensions.
void require_same_shape(const Image& a, const Image& b, const char* what);

double max_abs_diff(const Image& a, const Image& b);

}  // namespace iwn
