#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "iwn/attacks.hpp"
#include "iwn/backbone.hpp"
#include "iwn/data_io.hpp"
#include "iwn/dct_codec.hpp"
#include "iwn/metrics.hpp"

namespace iwn {

inline constexpr std::array<int, 5> kStabilityCounts{1, 5, 10, 30, 50};
inline constexpr std::array<int, 4> kRestoreCounts{1, 5, 10, 30};
inline constexpr std::array<int, 6> kAllowedProjections{0, 1, 5, 10, 30, 50};

/// n-fold composition of the network; n == 0 returns the input.
Image project_n(const Model& m, const Image& img, int n);

struct Restoration {
  Image restored;   ///< project_n(m, damaged, n)
  Image watermark;  ///< extract(restored, x, alpha)
};

Restoration restore_and_extract(const Model& m, const Image& x, const Image& damaged, EmbedConfig cfg, int n);

struct StabilityCell {
  int projections = 0;
  MetricsReport metrics;  ///< f^projections(x_w) against x_w
};

struct StabilityRow {
  int epoch = 0;
  std::vector<StabilityCell> cells;
};

StabilityRow stability_row(const Model& m, const Image& x_w, std::span<const int> counts, int epoch = 0);

/// One row per checkpoint (its meta.epoch labels the row).
std::vector<StabilityRow> run_stability_grid(std::span<const Checkpoint> per_epoch, const Image& x_w,
                                             std::span<const int> counts = kStabilityCounts);

struct EvalRow {
  std::string pair_id;
  AttackKind attack = AttackKind::Mosaic;
  int projections = 0;
  std::uint64_t seed = 0;
  double psnr_wm = 0.0;   ///< extracted watermark vs w
  double ssim_wm = 0.0;
  double psnr_img = 0.0;  ///< restored image vs x_w
  double ssim_img = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;  ///< sorted by (attack, projections, seed)
};

struct AttackSuiteConfig {
  std::string pair_id = "pair0";
  EmbedConfig embed{};
  std::vector<AttackKind> attacks{kAllAttacks.begin(), kAllAttacks.end()};
  std::vector<int> projections{kRestoreCounts.begin(), kRestoreCounts.end()};
  std::vector<std::uint64_t> seeds{0};
  SsimOptions ssim{};
};

/// Embeds w into x, damages x_w with every attack and seed, restores by each
/// projection count and scores the extracted watermark and restored image.
EvalReport run_attack_suite(const Model& m, const Image& x, const Image& w, const AttackSuiteConfig& cfg);

/// The damaged image used for (attack, seed) by run_attack_suite.
AttackSpec suite_attack(AttackKind kind, std::uint64_t seed);

/// Published scores for the full-scale model and baselines, per
/// attack as (ssim, psnr). Static reference numbers only.
struct ReferenceScore {
  std::string algorithm;
  AttackKind attack;
  double ssim;
  double psnr;
};
std::span<const ReferenceScore> reference_scores();

inline constexpr int kReportSchemaVersion = 1;

void write_report_csv(const EvalReport& report, std::ostream& out);
void write_report_json(const EvalReport& report, std::ostream& out);
/// Mean watermark SSIM/PSNR over seeds per (attack, projections).
void write_curves_csv(const EvalReport& report, std::ostream& out);
void write_stability_csv(std::span<const StabilityRow> rows, std::ostream& out);

}  // namespace iwn
