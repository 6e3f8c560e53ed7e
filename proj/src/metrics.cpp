#include "iwn/metrics.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "iwn/error.hpp"

namespace iwn {
namespace {

constexpr double kMax = 255.0;

struct Moments {
  double mu_a, mu_b, var_a, var_b, cov;
};

double ssim_from(const Moments& m, double c1, double c2) {
  return (2.0 * m.mu_a * m.mu_b + c1) * (2.0 * m.cov + c2) /
         ((m.mu_a * m.mu_a + m.mu_b * m.mu_b + c1) * (m.var_a + m.var_b + c2));
}

double global_channel_ssim(std::span<const double> a, std::span<const double> b, double c1, double c2) {
  const double n = static_cast<double>(a.size());
  double sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i] * kMax;
    sb += b[i] * kMax;
  }
  Moments m{sa / n, sb / n, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] * kMax - m.mu_a;
    const double db = b[i] * kMax - m.mu_b;
    m.var_a += da * da;
    m.var_b += db * db;
    m.cov += da * db;
  }
  m.var_a /= n;
  m.var_b /= n;
  m.cov /= n;
  return ssim_from(m, c1, c2);
}

// Separable weighted filtering restricted to the "valid" region.
std::vector<double> filter_valid(std::span<const double> src, int h, int w, const std::vector<double>& g) {
  const int k = static_cast<int>(g.size());
  const int oh = h - k + 1;
  const int ow = w - k + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += g[i] * src[static_cast<std::size_t>(y) * w + x + i];
      rows[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += g[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  return out;
}

double windowed_channel_ssim(std::span<const double> a, std::span<const double> b, int h, int w,
                             const SsimOptions& o, double c1, double c2) {
  std::vector<double> g(o.window);
  const int r = o.window / 2;
  double total = 0.0;
  for (int i = 0; i < o.window; ++i) {
    const double d = i - r;
    g[i] = std::exp(-d * d / (2.0 * o.sigma * o.sigma));
    total += g[i];
  }
  for (auto& v : g) v /= total;

  const std::size_t n = a.size();
  std::vector<double> A(n), B(n), AA(n), BB(n), AB(n);
  for (std::size_t i = 0; i < n; ++i) {
    A[i] = a[i] * kMax;
    B[i] = b[i] * kMax;
    AA[i] = A[i] * A[i];
    BB[i] = B[i] * B[i];
    AB[i] = A[i] * B[i];
  }
  const auto mu_a = filter_valid(A, h, w, g);
  const auto mu_b = filter_valid(B, h, w, g);
  const auto e_aa = filter_valid(AA, h, w, g);
  const auto e_bb = filter_valid(BB, h, w, g);
  const auto e_ab = filter_valid(AB, h, w, g);

  double sum = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const Moments m{mu_a[i], mu_b[i], e_aa[i] - mu_a[i] * mu_a[i], e_bb[i] - mu_b[i] * mu_b[i],
                    e_ab[i] - mu_a[i] * mu_b[i]};
    sum += ssim_from(m, c1, c2);
  }
  return sum / static_cast<double>(mu_a.size());
}

}  // namespace

double mse(const Image& a, const Image& b) {
  require_same_shape(a, b, "mse");
  if (a.empty()) return 0.0;
  auto pa = a.pixels();
  auto pb = b.pixels();
  double sum = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double d = (pa[i] - pb[i]) * kMax;
    sum += d * d;
  }
  return sum / static_cast<double>(pa.size());
}

double psnr(const Image& a, const Image& b) {
  const double e = mse(a, b);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(kMax * kMax / e);
}

double ssim(const Image& a, const Image& b, const SsimOptions& options) {
  require_same_shape(a, b, "ssim");
  if (a.empty()) return 1.0;
  const double c1 = std::pow(options.k1 * options.dynamic_range, 2);
  const double c2 = std::pow(options.k2 * options.dynamic_range, 2);
  const bool global = options.global || a.height() < options.window || a.width() < options.window;
  double sum = 0.0;
  for (int c = 0; c < a.channels(); ++c) {
    sum += global ? global_channel_ssim(a.plane(c), b.plane(c), c1, c2)
                  : windowed_channel_ssim(a.plane(c), b.plane(c), a.height(), a.width(), options, c1, c2);
  }
  return sum / a.channels();
}

MetricsReport measure(const Image& a, const Image& b, const SsimOptions& options) {
  MetricsReport r;
  r.mse = mse(a, b);
  r.psnr_db = r.mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(kMax * kMax / r.mse);
  r.ssim = ssim(a, b, options);
  return r;
}

}  // namespace iwn
