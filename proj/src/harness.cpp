#include "iwn/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <map>
#include <nlohmann/json.hpp>

#include "iwn/error.hpp"
#include "iwn/rng.hpp"

namespace iwn {
namespace {

std::string number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return fmt::format("{:.6f}", v);
}

nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  return number(v);
}

std::size_t attack_index(AttackKind k) {
  return static_cast<std::size_t>(std::find(kAllAttacks.begin(), kAllAttacks.end(), k) - kAllAttacks.begin());
}

}  // namespace

Image project_n(const Model& m, const Image& img, int n) {
  if (n < 0) throw Error(ErrorKind::InvalidConfig, "projection count must be >= 0");
  Image cur = img;
  for (int i = 0; i < n; ++i) cur = forward(m, cur);
  return cur;
}

Restoration restore_and_extract(const Model& m, const Image& x, const Image& damaged, EmbedConfig cfg, int n) {
  Image restored = project_n(m, damaged, n);
  Image watermark = extract(restored, x, cfg);
  return Restoration{std::move(restored), std::move(watermark)};
}

StabilityRow stability_row(const Model& m, const Image& x_w, std::span<const int> counts, int epoch) {
  std::vector<int> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end());
  std::map<int, MetricsReport> at;
  Image cur = x_w;
  int done = 0;
  for (int n : sorted) {
    if (n < 0) throw Error(ErrorKind::InvalidConfig, "projection count must be >= 0");
    cur = project_n(m, cur, n - done);
    done = n;
    at[n] = measure(cur, x_w);
  }
  StabilityRow row{epoch, {}};
  for (int n : counts) row.cells.push_back({n, at.at(n)});
  return row;
}

std::vector<StabilityRow> run_stability_grid(std::span<const Checkpoint> per_epoch, const Image& x_w,
                                             std::span<const int> counts) {
  std::vector<StabilityRow> grid;
  for (const auto& ckpt : per_epoch) {
    grid.push_back(stability_row(model_from_checkpoint(ckpt), x_w, counts, ckpt.meta.epoch));
  }
  return grid;
}

AttackSpec suite_attack(AttackKind kind, std::uint64_t seed) {
  return AttackSpec::standard(kind, derive_seed(seed, {kAttackStream, attack_index(kind)}));
}

EvalReport run_attack_suite(const Model& m, const Image& x, const Image& w, const AttackSuiteConfig& cfg) {
  for (int n : cfg.projections) {
    if (std::find(kAllowedProjections.begin(), kAllowedProjections.end(), n) == kAllowedProjections.end()) {
      throw Error(ErrorKind::InvalidConfig, "projection count " + std::to_string(n) + " is not one of 0,1,5,10,30,50");
    }
  }
  const Image x_w = embed(x, w, cfg.embed);
  std::vector<int> counts = cfg.projections;
  std::sort(counts.begin(), counts.end());
  counts.erase(std::unique(counts.begin(), counts.end()), counts.end());

  EvalReport report;
  for (auto kind : cfg.attacks) {
    for (auto seed : cfg.seeds) {
      const Image damaged = apply_attack(x_w, suite_attack(kind, seed));
      Image cur = damaged;
      int done = 0;
      for (int n : counts) {
        cur = project_n(m, cur, n - done);
        done = n;
        const Image extracted = extract(cur, x, cfg.embed);
        EvalRow row{cfg.pair_id, kind, n, seed, 0, 0, 0, 0};
        row.psnr_wm = psnr(extracted, w);
        row.ssim_wm = ssim(extracted, w, cfg.ssim);
        row.psnr_img = psnr(cur, x_w);
        row.ssim_img = ssim(cur, x_w, cfg.ssim);
        report.rows.push_back(std::move(row));
      }
    }
  }
  std::stable_sort(report.rows.begin(), report.rows.end(), [](const EvalRow& a, const EvalRow& b) {
    const auto ka = attack_index(a.attack), kb = attack_index(b.attack);
    if (ka != kb) return ka < kb;
    if (a.projections != b.projections) return a.projections < b.projections;
    return a.seed < b.seed;
  });
  return report;
}

std::span<const ReferenceScore> reference_scores() {
  using K = AttackKind;
  static const std::vector<ReferenceScore> table{
      {"Steganography", K::Mosaic, 0.495, 11.95}, {"Steganography", K::GaussianNoise, 0.013, 9.31},
      {"Steganography", K::SaltPepper, 0.456, 15.76}, {"Steganography", K::JpegCompress, 0.036, 7.84},
      {"Steganography", K::GaussianFilter, 0.010, 9.31},
      {"HiNet", K::Mosaic, 0.804, 19.90}, {"HiNet", K::GaussianNoise, 0.017, 6.00},
      {"HiNet", K::SaltPepper, 0.038, 6.61}, {"HiNet", K::JpegCompress, 0.107, 11.64},
      {"HiNet", K::GaussianFilter, 0.066, 11.80},
      {"PUSNet", K::Mosaic, 0.662, 14.12}, {"PUSNet", K::GaussianNoise, 0.025, 7.29},
      {"PUSNet", K::SaltPepper, 0.034, 7.49}, {"PUSNet", K::JpegCompress, 0.018, 7.05},
      {"PUSNet", K::GaussianFilter, 0.024, 7.48},
      {"IWN", K::Mosaic, 0.809, 22.38}, {"IWN", K::GaussianNoise, 0.866, 24.48},
      {"IWN", K::SaltPepper, 0.831, 23.78}, {"IWN", K::JpegCompress, 0.671, 19.66},
      {"IWN", K::GaussianFilter, 0.873, 24.53},
  };
  return table;
}

void write_report_csv(const EvalReport& report, std::ostream& out) {
  out << "pair_id,attack,projections,seed,psnr_wm,ssim_wm,psnr_img,ssim_img\n";
  for (const auto& r : report.rows) {
    out << r.pair_id << ',' << to_string(r.attack) << ',' << r.projections << ',' << r.seed << ','
        << number(r.psnr_wm) << ',' << number(r.ssim_wm) << ',' << number(r.psnr_img) << ',' << number(r.ssim_img)
        << '\n';
  }
}

void write_report_json(const EvalReport& report, std::ostream& out) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"pair_id", r.pair_id},
                    {"attack", std::string(to_string(r.attack))},
                    {"projections", r.projections},
                    {"seed", r.seed},
                    {"psnr_wm", json_number(r.psnr_wm)},
                    {"ssim_wm", json_number(r.ssim_wm)},
                    {"psnr_img", json_number(r.psnr_img)},
                    {"ssim_img", json_number(r.ssim_img)}});
  }
  nlohmann::json reference = nlohmann::json::array();
  for (const auto& s : reference_scores()) {
    reference.push_back(
        {{"algorithm", s.algorithm}, {"attack", std::string(to_string(s.attack))}, {"ssim", s.ssim}, {"psnr", s.psnr}});
  }
  nlohmann::json doc{{"schema_version", kReportSchemaVersion}, {"rows", rows}, {"reference", reference}};
  out << doc.dump(2) << '\n';
}

void write_curves_csv(const EvalReport& report, std::ostream& out) {
  struct Acc {
    double ssim = 0, psnr = 0;
    int n = 0;
  };
  std::map<std::pair<std::size_t, int>, Acc> acc;
  for (const auto& r : report.rows) {
    auto& a = acc[{attack_index(r.attack), r.projections}];
    a.ssim += r.ssim_wm;
    a.psnr += r.psnr_wm;
    ++a.n;
  }
  out << "attack,projections,mean_ssim_wm,mean_psnr_wm\n";
  for (const auto& [key, a] : acc) {
    out << to_string(kAllAttacks[key.first]) << ',' << key.second << ',' << number(a.ssim / a.n) << ','
        << number(a.psnr / a.n) << '\n';
  }
}

void write_stability_csv(std::span<const StabilityRow> rows, std::ostream& out) {
  out << "epoch,projections,psnr_db,ssim\n";
  for (const auto& row : rows)
    for (const auto& c : row.cells)
      out << row.epoch << ',' << c.projections << ',' << number(c.metrics.psnr_db) << ',' << number(c.metrics.ssim)
          << '\n';
}

}  // namespace iwn
