#pragma once

#include <cmath>
#include <vector>

#include "iwn/image.hpp"

namespace iwn::test {

// Direct-summation SSIM: explicit 2-D Gaussian weights, two-pass moments per
// window, valid positions only, mean over windows then channels.
inline double oracle_ssim(const Image& a, const Image& b, int win = 11, double sigma = 1.5) {
  const double L = 255.0, c1 = (0.01 * L) * (0.01 * L), c2 = (0.03 * L) * (0.03 * L);
  std::vector<double> w2(win * win);
  double tot = 0.0;
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) {
      const double di = i - win / 2, dj = j - win / 2;
      w2[i * win + j] = std::exp(-(di * di + dj * dj) / (2 * sigma * sigma));
      tot += w2[i * win + j];
    }
  for (auto& v : w2) v /= tot;
  double acc = 0.0;
  for (int c = 0; c < a.channels(); ++c) {
    double ch = 0.0;
    int count = 0;
    for (int y = 0; y + win <= a.height(); ++y)
      for (int x = 0; x + win <= a.width(); ++x) {
        double ma = 0, mb = 0;
        for (int i = 0; i < win; ++i)
          for (int j = 0; j < win; ++j) {
            ma += w2[i * win + j] * a.at(c, y + i, x + j) * L;
            mb += w2[i * win + j] * b.at(c, y + i, x + j) * L;
          }
        double va = 0, vb = 0, cov = 0;
        for (int i = 0; i < win; ++i)
          for (int j = 0; j < win; ++j) {
            const double da = a.at(c, y + i, x + j) * L - ma, db = b.at(c, y + i, x + j) * L - mb;
            va += w2[i * win + j] * da * da;
            vb += w2[i * win + j] * db * db;
            cov += w2[i * win + j] * da * db;
          }
        ch += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
    acc += ch / count;
  }
  return acc / a.channels();
}

inline double oracle_psnr(const Image& a, const Image& b) {
  double s = 0.0;
  for (int c = 0; c < a.channels(); ++c)
    for (int y = 0; y < a.height(); ++y)
      for (int x = 0; x < a.width(); ++x) {
        const double d = 255.0 * a.at(c, y, x) - 255.0 * b.at(c, y, x);
        s += d * d;
      }
  return 10.0 * std::log10(255.0 * 255.0 / (s / a.size()));
}

}  // namespace iwn::test
