#include "iwn/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "iwn/error.hpp"

namespace iwn {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnreadableFile: return "UnreadableFile";
    case ErrorKind::Io: return "IoError";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::WrongTransformKind: return "WrongTransformKind";
    case ErrorKind::ZeroStrength: return "ZeroStrength";
    case ErrorKind::UnsupportedKind: return "UnsupportedKind";
    case ErrorKind::EmptyPool: return "EmptyPool";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::StaleSnapshot: return "StaleSnapshot";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
  }
  return "Unknown";
}

Image::Image(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  if (height < 0 || width < 0 || channels < 0) {
    throw Error(ErrorKind::ShapeMismatch, "negative image dimension");
  }
  pixels_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

std::span<double> Image::plane(int c) {
  return std::span<double>(pixels_).subspan(c * plane_size(), plane_size());
}

std::span<const double> Image::plane(int c) const {
  return std::span<const double>(pixels_).subspan(c * plane_size(), plane_size());
}

std::size_t Image::clip() {
  std::size_t changed = 0;
  for (auto& v : pixels_) {
    const double c = std::clamp(v, 0.0, 1.0);
    if (c != v || std::isnan(v)) {
      ++changed;
      v = std::isnan(v) ? 0.0 : c;
    }
  }
  return changed;
}

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) {
    throw Error(ErrorKind::ShapeMismatch,
                std::string(what) + ": " + std::to_string(a.height()) + "x" + std::to_string(a.width()) + "x" +
                    std::to_string(a.channels()) + " vs " + std::to_string(b.height()) + "x" +
                    std::to_string(b.width()) + "x" + std::to_string(b.channels()));
  }
}

double max_abs_diff(const Image& a, const Image& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  auto pa = a.pixels();
  auto pb = b.pixels();
  for (std::size_t i = 0; i < pa.size(); ++i) m = std::max(m, std::abs(pa[i] - pb[i]));
  return m;
}

}  // namespace iwn
