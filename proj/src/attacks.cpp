#include "iwn/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/imgcodecs.hpp>
#include <random>
#include <vector>

#include "iwn/error.hpp"
#include "iwn/rng.hpp"

namespace iwn {
namespace {

double uniform01(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

int uniform_int(std::mt19937_64& gen, int lo, int hi) {  // inclusive
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(gen() % span);
}

void pixelate_block(Image& img, int y0, int x0, int y1, int x1) {
  const double n = static_cast<double>(y1 - y0) * (x1 - x0);
  for (int c = 0; c < img.channels(); ++c) {
    double sum = 0.0;
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) sum += img.at(c, y, x);
    const double mean = sum / n;
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) img.at(c, y, x) = mean;
  }
}

Image mosaic(const Image& img, const AttackParams& p, std::mt19937_64& gen) {
  Image out = img;
  const int h = img.height();
  const int w = img.width();
  const int block = std::max(1, p.mosaic_block);
  const double area = p.region_fraction * h * w;

  if (p.contiguous_region) {
    // Width drawn so that the matching height still fits in the image.
    const int min_w = std::clamp(static_cast<int>(std::ceil(area / h)), 1, w);
    const int rw = uniform_int(gen, min_w, w);
    const int rh = std::clamp(static_cast<int>(std::lround(area / rw)), 1, h);
    const int y0 = uniform_int(gen, 0, h - rh);
    const int x0 = uniform_int(gen, 0, w - rw);
    for (int by = y0; by < y0 + rh; by += block)
      for (int bx = x0; bx < x0 + rw; bx += block)
        pixelate_block(out, by, bx, std::min(by + block, y0 + rh), std::min(bx + block, x0 + rw));
    return out;
  }

  // Scattered mode: a random subset of the block grid covering the fraction.
  const int gy = (h + block - 1) / block;
  const int gx = (w + block - 1) / block;
  std::vector<int> cells(static_cast<std::size_t>(gy) * gx);
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = static_cast<int>(i);
  for (std::size_t i = cells.size(); i > 1; --i) std::swap(cells[i - 1], cells[gen() % i]);
  const auto take = static_cast<std::size_t>(std::lround(p.region_fraction * cells.size()));
  for (std::size_t i = 0; i < take; ++i) {
    const int by = (cells[i] / gx) * block;
    const int bx = (cells[i] % gx) * block;
    pixelate_block(out, by, bx, std::min(by + block, h), std::min(bx + block, w));
  }
  return out;
}

Image gaussian_noise(const Image& img, const AttackParams& p, std::mt19937_64& gen) {
  Image out = img;
  std::normal_distribution<double> noise(p.noise_mean, p.noise_std);
  for (auto& v : out.pixels()) v += noise(gen);
  out.clip();
  return out;
}

Image salt_pepper(const Image& img, const AttackParams& p, std::mt19937_64& gen) {
  Image out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (uniform01(gen) >= p.sp_amount) continue;
      const double value = uniform01(gen) < p.sp_ratio ? 1.0 : 0.0;
      for (int c = 0; c < img.channels(); ++c) out.at(c, y, x) = value;
    }
  }
  return out;
}

Image jpeg_roundtrip(const Image& img, const AttackParams& p) {
  const int h = img.height();
  const int w = img.width();
  const int channels = img.channels();
  cv::Mat mat(h, w, channels == 1 ? CV_8UC1 : CV_8UC3);
  for (int y = 0; y < h; ++y) {
    auto* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        // OpenCV stores BGR.
        const int dst = channels == 3 ? 2 - c : c;
        row[x * channels + dst] = static_cast<std::uint8_t>(std::lround(std::clamp(img.at(c, y, x), 0.0, 1.0) * 255.0));
      }
    }
  }
  std::vector<std::uint8_t> buffer;
  const std::vector<int> params{cv::IMWRITE_JPEG_QUALITY, std::clamp(p.jpeg_quality, 1, 100)};
  if (!cv::imencode(".jpg", mat, buffer, params)) throw Error(ErrorKind::Io, "JPEG encode failed");
  cv::Mat decoded = cv::imdecode(buffer, channels == 1 ? cv::IMREAD_GRAYSCALE : cv::IMREAD_COLOR);
  if (decoded.empty() || decoded.rows != h || decoded.cols != w) {
    throw Error(ErrorKind::Io, "JPEG decode failed");
  }
  Image out(h, w, channels);
  for (int y = 0; y < h; ++y) {
    const auto* row = decoded.ptr<std::uint8_t>(y);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) out.at(c, y, x) = row[x * channels + (channels == 3 ? 2 - c : c)] / 255.0;
  }
  return out;
}

// Half-sample symmetric reflection: index -1 maps to 0, n maps to n - 1.
int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
  return i;
}

Image gaussian_filter(const Image& img, const AttackParams& p) {
  const int k = std::max(1, p.kernel_size | 1);
  const int r = k / 2;
  std::vector<double> kernel(k);
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    const double d = i - r;
    kernel[i] = std::exp(-d * d / (2.0 * p.sigma * p.sigma));
    total += kernel[i];
  }
  for (auto& v : kernel) v /= total;

  const int h = img.height();
  const int w = img.width();
  Image cur = img;
  Image tmp(h, w, img.channels());
  for (int rep = 0; rep < p.repeats; ++rep) {
    for (int c = 0; c < img.channels(); ++c) {
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          double acc = 0.0;
          for (int i = 0; i < k; ++i) acc += kernel[i] * cur.at(c, y, reflect(x + i - r, w));
          tmp.at(c, y, x) = acc;
        }
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          double acc = 0.0;
          for (int i = 0; i < k; ++i) acc += kernel[i] * tmp.at(c, reflect(y + i - r, h), x);
          cur.at(c, y, x) = acc;
        }
    }
  }
  cur.clip();
  return cur;
}

}  // namespace

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::Mosaic: return "mosaic";
    case AttackKind::GaussianNoise: return "gaussian_noise";
    case AttackKind::SaltPepper: return "salt_pepper";
    case AttackKind::JpegCompress: return "jpeg";
    case AttackKind::GaussianFilter: return "gaussian_filter";
  }
  return "unknown";
}

std::optional<AttackKind> parse_attack_kind(std::string_view name) {
  for (auto kind : kAllAttacks)
    if (to_string(kind) == name) return kind;
  return std::nullopt;
}

Image apply_attack(const Image& img, const AttackSpec& spec) {
  std::mt19937_64 gen(mix64(spec.seed));
  switch (spec.kind) {
    case AttackKind::Mosaic: return mosaic(img, spec.params, gen);
    case AttackKind::GaussianNoise: return gaussian_noise(img, spec.params, gen);
    case AttackKind::SaltPepper: return salt_pepper(img, spec.params, gen);
    case AttackKind::JpegCompress: return jpeg_roundtrip(img, spec.params);
    case AttackKind::GaussianFilter: return gaussian_filter(img, spec.params);
  }
  throw Error(ErrorKind::UnsupportedKind, "unknown attack kind");
}

AttackSpec sample_attack(std::span<const AttackKind> pool, std::uint64_t rng_seed) {
  if (pool.empty()) throw Error(ErrorKind::EmptyPool, "attack pool is empty");
  std::mt19937_64 gen(mix64(rng_seed));
  const auto kind = pool[gen() % pool.size()];
  return AttackSpec::standard(kind, gen());
}

}  // namespace iwn
