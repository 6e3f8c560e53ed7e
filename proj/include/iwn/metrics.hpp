#pragma once

#include "iwn/image.hpp"

namespace iwn {

/// All metrics work on the 8-bit scale: values are multiplied by 255 and
/// MAX = L = 255.
struct MetricsReport {
  double psnr_db = 0.0;  ///< +infinity for identical images
  double ssim = 0.0;
  double mse = 0.0;
};

struct SsimOptions {
  int window = 11;       ///< Gaussian window side
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;
  bool global = false;   ///< single window covering the whole channel
};

double mse(const Image& a, const Image& b);
double psnr(const Image& a, const Image& b);

/// Mean of the local SSIM map over all fully-contained windows, averaged over
/// channels. Channels smaller than the window fall back to global statistics.
double ssim(const Image& a, const Image& b, const SsimOptions& options = {});

MetricsReport measure(const Image& a, const Image& b, const SsimOptions& options = {});

}  // namespace iwn
