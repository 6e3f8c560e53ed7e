#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "iwn/backbone.hpp"
#include "iwn/image.hpp"

namespace iwn::test {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(IWN_TEST_DATA_DIR) / name; }

inline Image random_image(int h, int w, int c, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Image img(h, w, c);
  for (auto& v : img.pixels()) v = u(gen);
  return img;
}

// Smooth image whose values stay well inside (0, 1) so embedding never clips.
inline Image smooth_image(int h, int w, int c, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(h, w, c);
  for (int ch = 0; ch < c; ++ch) {
    const double fx = 1 + 3 * u(gen), fy = 1 + 3 * u(gen), ph = 6.28 * u(gen);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        img.at(ch, y, x) = 0.5 + 0.25 * std::sin(fx * x / w * 6.28 + ph) * std::cos(fy * y / h * 6.28);
  }
  return img;
}

// Direct double sum of the orthonormal 2-D DCT-II (and its inverse).
inline std::vector<double> brute_dct2(const std::vector<double>& f, int n, int m) {
  const double pi = std::numbers::pi;
  auto c = [](int k) { return k == 0 ? 1.0 / std::sqrt(2.0) : 1.0; };
  std::vector<double> out(static_cast<std::size_t>(n) * m, 0.0);
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < m; ++v) {
      double s = 0.0;
      for (int x = 0; x < n; ++x)
        for (int y = 0; y < m; ++y)
          s += f[x * m + y] * std::cos(pi * (2 * x + 1) * u / (2.0 * n)) * std::cos(pi * (2 * y + 1) * v / (2.0 * m));
      out[u * m + v] = 2.0 / std::sqrt(static_cast<double>(n) * m) * c(u) * c(v) * s;
    }
  return out;
}

inline std::vector<double> brute_idct2(const std::vector<double>& F, int n, int m) {
  const double pi = std::numbers::pi;
  auto c = [](int k) { return k == 0 ? 1.0 / std::sqrt(2.0) : 1.0; };
  std::vector<double> out(static_cast<std::size_t>(n) * m, 0.0);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < m; ++y) {
      double s = 0.0;
      for (int u = 0; u < n; ++u)
        for (int v = 0; v < m; ++v)
          s += c(u) * c(v) * F[u * m + v] * std::cos(pi * (2 * x + 1) * u / (2.0 * n)) *
               std::cos(pi * (2 * y + 1) * v / (2.0 * m));
      out[x * m + y] = 2.0 / std::sqrt(static_cast<double>(n) * m) * s;
    }
  return out;
}

// conv 3->8 (k4 s2 p1, GroupNorm with 2 groups) then transposed conv 8->3 on
// 8x8 images.
inline ModelConfig toy_config() {
  ModelConfig cfg;
  cfg.variant = Variant::Custom;
  cfg.image_size = 8;
  cfg.encoder_channels = {8};
  cfg.encoder_kernels = {4};
  cfg.encoder_strides = {2};
  cfg.encoder_paddings = {1};
  cfg.encoder_norm = {true};
  cfg.decoder_channels = {3};
  cfg.decoder_kernels = {4};
  cfg.decoder_strides = {2};
  cfg.decoder_paddings = {1};
  cfg.decoder_norm = {false};
  cfg.norm_groups = 2;
  return cfg;
}

// Deeper toy that also covers decoder GroupNorm and ReLU.
inline ModelConfig toy_config_deep() {
  ModelConfig cfg = toy_config();
  cfg.encoder_channels = {4, 8};
  cfg.encoder_kernels = {4, 4};
  cfg.encoder_strides = {2, 2};
  cfg.encoder_paddings = {1, 1};
  cfg.encoder_norm = {false, true};
  cfg.decoder_channels = {4, 3};
  cfg.decoder_kernels = {4, 4};
  cfg.decoder_strides = {2, 2};
  cfg.decoder_paddings = {1, 1};
  cfg.decoder_norm = {true, false};
  return cfg;
}

// Weights scaled up from the default init so activations are not all near
// zero and the finite differences see a well-conditioned function.
inline BasicModel<double> toy_model(const ModelConfig& cfg, std::uint64_t seed, double scale = 10.0) {
  auto m = build_model<double>(cfg, seed);
  std::mt19937_64 gen(seed ^ 0x5eedULL);
  std::normal_distribution<double> n(0.0, 0.1);
  for (auto& p : m.mutable_parameters()) {
    const bool is_norm = p.name.find("norm") != std::string::npos;
    for (auto& v : p.values) v = is_norm ? v + n(gen) : v * scale + 0.01 * n(gen);
  }
  return m;
}

// Normwise relative error max|fd - analytic| / max|fd| between an analytic
// gradient and central differences over every parameter.
inline double gradient_error(const BasicModel<double>& m, const ParameterSet<double>& analytic,
                             const std::function<double(const BasicModel<double>&)>& loss, double h = 1e-6) {
  double diff = 0.0, scale = 0.0;
  auto params = m.parameters();
  for (std::size_t i = 0; i < params.size(); ++i)
    for (std::size_t k = 0; k < params[i].values.size(); ++k) {
      const double v = params[i].values[k];
      params[i].values[k] = v + h;
      const double up = loss(BasicModel<double>(m.config(), params, m.step()));
      params[i].values[k] = v - h;
      const double down = loss(BasicModel<double>(m.config(), params, m.step()));
      params[i].values[k] = v;
      const double fd = (up - down) / (2 * h);
      diff = std::max(diff, std::abs(fd - analytic[i].values[k]));
      scale = std::max(scale, std::abs(fd));
    }
  return scale > 0.0 ? diff / scale : std::numeric_limits<double>::infinity();
}

}  // namespace iwn::test
