#include "cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "iwn/attacks.hpp"
#include "iwn/data_io.hpp"
#include "iwn/dct_codec.hpp"
#include "iwn/error.hpp"
#include "iwn/harness.hpp"
#include "iwn/metrics.hpp"
#include "iwn/trainer.hpp"

namespace iwn::cli {
namespace fs = std::filesystem;

namespace {

constexpr int kManifestVersion = 1;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnreadableFile:
    case ErrorKind::Io:
      return kIoFailure;
    case ErrorKind::NonFiniteLoss:
      return kDiverged;
    default:
      return kBadShapeOrConfig;
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

// Options shared by several subcommands; one instance per run.
struct Options {
  std::string original, watermark, input, checkpoint, out;
  double alpha = 0.1;
  std::uint64_t seed = 0;

  // attack
  std::string kind = "gaussian_noise";

  // train
  std::string variant = "origin";
  int epochs = 10;
  int duplication = 1200;
  int batch = 1;
  double lr = 1e-4;
  LossWeights weights{};
  bool no_grad_clip = false;
  double clip_norm = 10.0;
  bool literal_rec = false;
  bool fixed_attack = false;
  bool no_stability = false;
  bool no_epoch_checkpoints = false;

  // restore / evaluate
  int restore_projections = 30;
  std::vector<int> projections{kRestoreCounts.begin(), kRestoreCounts.end()};
  std::vector<std::string> kinds;
  std::vector<std::uint64_t> seeds;
  std::string pair_id = "pair0";
  bool global_ssim = false;
};

const std::vector<std::string>& attack_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (auto k : kAllAttacks) v.emplace_back(to_string(k));
    return v;
  }();
  return names;
}

AttackKind attack_from(const std::string& name) {
  auto k = parse_attack_kind(name);
  if (!k) throw Error(ErrorKind::UnsupportedKind, "unknown attack " + name);
  return *k;
}

void prepare_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw Error(ErrorKind::Io, "cannot create output directory " + out);
}

void write_manifest(const CLI::App& sub, const std::string& out) {
  const fs::path path = fs::path(out) / "run_manifest.ini";
  auto file = open_out(path);
  file << "; iwn run manifest, format version " << kManifestVersion << "\n"
       << "; replay with: iwn --config run_manifest.ini\n"
       << "[" << sub.get_name() << "]\n"
       << sub.config_to_str(true, false);
  finish(file, path);
}

void add_seed(CLI::App* sub, Options& o) {
  sub->add_option("--seed", o.seed, "Master seed (falls back to $IWN_SEED)")->envname("IWN_SEED")->capture_default_str();
}

void add_alpha(CLI::App* sub, Options& o) {
  sub->add_option("--alpha", o.alpha, "Embedding strength")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0, "in (0, 1]"))
      ->check(CLI::Validator(
          [](std::string& s) { return std::strtod(s.c_str(), nullptr) == 0.0 ? "alpha must be non-zero" : ""; }, "",
          "nonzero"));
}

void add_out(CLI::App* sub, Options& o) { sub->add_option("--out", o.out, "Output directory")->required(); }

// --- commands ---------------------------------------------------------------

int cmd_embed(const Options& o) {
  const Image x = load_image(o.original);
  const Image w = load_image(o.watermark);
  double clipped = 0.0;
  const Image x_w = embed(x, w, EmbedConfig{o.alpha}, &clipped);
  const fs::path path = fs::path(o.out) / "watermarked.png";
  save_image(x_w, path);
  // Score what was written, not the unquantized buffer.
  const Image stored = load_image(path);
  std::cout << fmt::format("psnr_db={:.9f}\n", psnr(x, stored));
  std::cout << fmt::format("clipped_fraction={:.6f}\n", clipped);
  std::cout << "output=" << path.string() << "\n";
  return kOk;
}

int cmd_extract(const Options& o) {
  const Image x_w = load_image(o.input);
  const Image x = load_image(o.original);
  const fs::path path = fs::path(o.out) / "extracted.png";
  save_image(extract(x_w, x, EmbedConfig{o.alpha}), path);
  std::cout << "output=" << path.string() << "\n";
  return kOk;
}

int cmd_attack(const Options& o) {
  const Image img = load_image(o.input);
  const AttackSpec spec = AttackSpec::standard(attack_from(o.kind), o.seed);
  const Image damaged = apply_attack(img, spec);
  const fs::path path = fs::path(o.out) / "attacked.png";
  save_image(damaged, path);
  std::cout << fmt::format("attack={} seed={} psnr_db={:.6f}\n", o.kind, o.seed, psnr(img, damaged));
  std::cout << "output=" << path.string() << "\n";
  return kOk;
}

void write_loss_header(std::ostream& out) { out << "step,epoch,total,l_rec,l_idem,l_tight,l_wm,l_origin\n"; }

void write_loss_row(std::ostream& out, std::int64_t step, int epoch, const LossBreakdown& l) {
  out << fmt::format("{},{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}\n", step, epoch, l.total, l.l_rec, l.l_idem,
                     l.l_tight, l.l_wm, l.l_origin);
}

class CliObserver : public TrainObserver {
 public:
  CliObserver(fs::path dir, bool epoch_checkpoints, std::int64_t total_steps)
      : dir_(std::move(dir)), loss_path_(dir_ / "loss_log.csv"), loss_(open_out(loss_path_)),
        epoch_checkpoints_(epoch_checkpoints), total_steps_(total_steps) {
    write_loss_header(loss_);
  }

  void on_step(std::int64_t step, int epoch, const LossBreakdown& loss) override {
    write_loss_row(loss_, step, epoch, loss);
    if (step == 1 || step % 100 == 0 || step == total_steps_)
      spdlog::info("step {}/{} epoch {} total {:.5f} rec {:.5f} idem {:.5f} wm {:.4f} origin {:.4f}", step,
                   total_steps_, epoch, loss.total, loss.l_rec, loss.l_idem, loss.l_wm, loss.l_origin);
  }

  void on_epoch(int epoch, const Checkpoint& ckpt, const StabilityRow& row) override {
    finish(loss_, loss_path_);
    if (epoch_checkpoints_) save_checkpoint(ckpt, dir_ / fmt::format("checkpoint_epoch{}.iwn", epoch));
    if (!row.cells.empty()) {
      rows_.push_back(row);
      write_stability();
      std::string cells;
      for (const auto& c : row.cells) cells += fmt::format(" f^{}={:.2f}dB", c.projections, c.metrics.psnr_db);
      spdlog::info("epoch {} stability:{}", epoch, cells);
    }
  }

  void close() { finish(loss_, loss_path_); }

 private:
  void write_stability() {
    const fs::path path = dir_ / "stability_grid.csv";
    auto out = open_out(path);
    write_stability_csv(rows_, out);
    finish(out, path);
  }

  fs::path dir_;
  fs::path loss_path_;
  std::ofstream loss_;
  bool epoch_checkpoints_;
  std::int64_t total_steps_;
  std::vector<StabilityRow> rows_;
};

int cmd_train(const Options& o) {
  TrainConfig cfg;
  cfg.learning_rate = o.lr;
  cfg.epochs = o.epochs;
  cfg.duplication = o.duplication;
  cfg.batch_size = o.batch;
  cfg.alpha = o.alpha;
  cfg.weights = o.weights;
  cfg.model = ModelConfig::for_variant(*parse_variant(o.variant));
  cfg.master_seed = o.seed;
  cfg.grad_clip = !o.no_grad_clip;
  cfg.clip_norm = o.clip_norm;
  cfg.literal_rec = o.literal_rec;
  cfg.fixed_attack = o.fixed_attack;
  cfg.record_stability = !o.no_stability;
  cfg.validate();

  const Image x = load_image(o.original);
  const Image w = load_image(o.watermark);
  CliObserver observer(o.out, !o.no_epoch_checkpoints, static_cast<std::int64_t>(cfg.epochs) * cfg.duplication);
  try {
    const TrainResult result = train(x, w, cfg, &observer);
    observer.close();
    const fs::path model_path = fs::path(o.out) / "model.iwn";
    save_checkpoint(result.checkpoint, model_path);
    const auto& last = result.history.steps.back();
    std::cout << fmt::format("steps={} final_total={:.9g}\n", result.history.steps.size(), last.total);
    std::cout << "output=" << model_path.string() << "\n";
  } catch (const TrainingDiverged& e) {
    observer.close();
    std::cerr << "training diverged: " << e.detail() << " after " << e.partial_history().steps.size() << " steps\n";
    return kDiverged;
  }
  return kOk;
}

int cmd_restore(const Options& o, bool alpha_given) {
  const Checkpoint ckpt = load_checkpoint(o.checkpoint);
  const Model model = model_from_checkpoint(ckpt);
  const Image damaged = load_image(o.input);
  const Image x = load_image(o.original);
  const EmbedConfig embed_cfg{alpha_given ? o.alpha : ckpt.meta.alpha};
  const Restoration r = restore_and_extract(model, x, damaged, embed_cfg, o.restore_projections);
  const fs::path restored = fs::path(o.out) / "restored.png";
  const fs::path extracted = fs::path(o.out) / "extracted.png";
  save_image(r.restored, restored);
  save_image(r.watermark, extracted);
  if (!o.watermark.empty()) {
    const Image w = load_image(o.watermark);
    const Image baseline = extract(damaged, x, embed_cfg);
    const auto before = measure(baseline, w);
    const auto after = measure(r.watermark, w);
    std::cout << fmt::format("unrestored ssim={:.6f} psnr_db={:.6f}\n", before.ssim, before.psnr_db);
    std::cout << fmt::format("restored   ssim={:.6f} psnr_db={:.6f}\n", after.ssim, after.psnr_db);
  }
  std::cout << "output=" << restored.string() << "\n";
  std::cout << "output=" << extracted.string() << "\n";
  return kOk;
}

int cmd_evaluate(const Options& o, bool alpha_given) {
  const Checkpoint ckpt = load_checkpoint(o.checkpoint);
  const Model model = model_from_checkpoint(ckpt);
  const Image x = load_image(o.original);
  const Image w = load_image(o.watermark);

  AttackSuiteConfig cfg;
  cfg.pair_id = o.pair_id;
  cfg.embed.alpha = alpha_given ? o.alpha : ckpt.meta.alpha;
  cfg.projections = o.projections;
  cfg.seeds = o.seeds.empty() ? std::vector<std::uint64_t>{o.seed} : o.seeds;
  if (!o.kinds.empty()) {
    cfg.attacks.clear();
    for (const auto& k : o.kinds) cfg.attacks.push_back(attack_from(k));
  }
  cfg.ssim.global = o.global_ssim;
  const EvalReport report = run_attack_suite(model, x, w, cfg);

  const fs::path dir(o.out);
  const std::pair<const char*, void (*)(const EvalReport&, std::ostream&)> writers[] = {
      {"eval_report.csv", write_report_csv},
      {"eval_report.json", write_report_json},
      {"projection_curves.csv", write_curves_csv},
  };
  for (const auto& [name, write] : writers) {
    auto out = open_out(dir / name);
    write(report, out);
    finish(out, dir / name);
  }

  std::map<AttackKind, const EvalRow*> best;
  for (const auto& row : report.rows) {
    auto& b = best[row.attack];
    if (!b || row.ssim_wm > b->ssim_wm) b = &row;
  }
  for (const auto& [kind, row] : best)
    std::cout << fmt::format("{:<16} best n={:<3} ssim_wm={:.4f} psnr_wm={:.3f}\n", to_string(kind), row->projections,
                             row->ssim_wm, row->psnr_wm);
  std::cout << "rows=" << report.rows.size() << "\n";
  return kOk;
}

}  // namespace

int run(std::vector<std::string> args) {
  CLI::App app{"Idempotent watermark restoration: embed, attack, train, restore, evaluate", "iwn"};
  app.set_config("--config", "", "INI file with one [command] section; flags override it");
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->capture_default_str();

  Options o;

  auto* embed_cmd = app.add_subcommand("embed", "Embed a watermark in the DCT domain");
  embed_cmd->add_option("--original", o.original, "Host image")->required();
  embed_cmd->add_option("--watermark", o.watermark, "Watermark image")->required();
  add_alpha(embed_cmd, o);
  add_out(embed_cmd, o);

  auto* extract_cmd = app.add_subcommand("extract", "Recover the watermark from a watermarked image");
  extract_cmd->add_option("--input", o.input, "Watermarked (or restored) image")->required();
  extract_cmd->add_option("--original", o.original, "Host image")->required();
  add_alpha(extract_cmd, o);
  add_out(extract_cmd, o);

  auto* attack_cmd = app.add_subcommand("attack", "Damage an image with one attack");
  attack_cmd->add_option("--input", o.input, "Image to damage")->required();
  attack_cmd->add_option("--kind", o.kind, "Attack kind")->capture_default_str()->check(CLI::IsMember(attack_names()));
  add_seed(attack_cmd, o);
  add_out(attack_cmd, o);

  auto* train_cmd = app.add_subcommand("train", "Train one restoration network on a (host, watermark) pair");
  train_cmd->add_option("--original", o.original, "Host image")->required();
  train_cmd->add_option("--watermark", o.watermark, "Watermark image")->required();
  add_alpha(train_cmd, o);
  train_cmd->add_option("--variant", o.variant, "small|origin|large")
      ->capture_default_str()
      ->check(CLI::IsMember({"small", "origin", "large"}));
  train_cmd->add_option("--epochs", o.epochs)->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--duplication", o.duplication, "Steps per epoch")->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", o.batch, "Damaged instances per step")->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", o.lr, "Learning rate")->capture_default_str()->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--lambda-rec", o.weights.lambda_rec)->capture_default_str();
  train_cmd->add_option("--lambda-idem", o.weights.lambda_idem)->capture_default_str();
  train_cmd->add_option("--lambda-tight", o.weights.lambda_tight)->capture_default_str();
  train_cmd->add_option("--lambda-wm", o.weights.lambda_wm)->capture_default_str();
  train_cmd->add_option("--lambda-origin", o.weights.lambda_origin)->capture_default_str();
  train_cmd->add_option("--tight-ratio", o.weights.r, "Tightness bound as a multiple of the reconstruction loss")
      ->capture_default_str();
  train_cmd->add_flag("--no-grad-clip", o.no_grad_clip, "Disable gradient-norm clipping");
  train_cmd->add_option("--clip-norm", o.clip_norm)->capture_default_str();
  train_cmd->add_flag("--literal-rec", o.literal_rec, "Anchor both reconstruction terms to the host image");
  train_cmd->add_flag("--fixed-attack", o.fixed_attack, "Reuse one damaged instance for every step");
  train_cmd->add_flag("--no-stability", o.no_stability, "Skip the per-epoch projection grid");
  train_cmd->add_flag("--no-epoch-checkpoints", o.no_epoch_checkpoints, "Only write the final model");
  add_seed(train_cmd, o);
  add_out(train_cmd, o);

  auto* restore_cmd = app.add_subcommand("restore", "Project a damaged image and extract its watermark");
  restore_cmd->add_option("--checkpoint", o.checkpoint, "Trained model")->required();
  restore_cmd->add_option("--input", o.input, "Damaged watermarked image")->required();
  restore_cmd->add_option("--original", o.original, "Host image")->required();
  restore_cmd->add_option("--watermark", o.watermark, "Reference watermark, for scoring only");
  restore_cmd->add_option("--projections", o.restore_projections, "Number of network passes")
      ->capture_default_str()
      ->check(CLI::IsMember(std::vector<int>(kAllowedProjections.begin(), kAllowedProjections.end())));
  add_alpha(restore_cmd, o);
  add_out(restore_cmd, o);

  auto* eval_cmd = app.add_subcommand("evaluate", "Attack suite: every attack x projection count x seed");
  eval_cmd->add_option("--checkpoint", o.checkpoint, "Trained model")->required();
  eval_cmd->add_option("--original", o.original, "Host image")->required();
  eval_cmd->add_option("--watermark", o.watermark, "Watermark image")->required();
  eval_cmd->add_option("--projections", o.projections, "Projection counts")
      ->capture_default_str()
      ->check(CLI::IsMember(std::vector<int>(kAllowedProjections.begin(), kAllowedProjections.end())));
  eval_cmd->add_option("--kind", o.kinds, "Attack kinds (default: all)")->check(CLI::IsMember(attack_names()));
  eval_cmd->add_option("--seeds", o.seeds, "Attack seeds (default: --seed)");
  eval_cmd->add_option("--pair-id", o.pair_id)->capture_default_str();
  eval_cmd->add_flag("--global-ssim", o.global_ssim, "Whole-image SSIM statistics instead of 11x11 windows");
  add_alpha(eval_cmd, o);
  add_seed(eval_cmd, o);
  add_out(eval_cmd, o);

  for (auto* sub : app.get_subcommands({})) sub->configurable();

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kBadArgs;
  }

  auto* sub = app.get_subcommands().front();
  static const auto logger = spdlog::stderr_color_mt("iwn");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    prepare_out_dir(o.out);
    write_manifest(*sub, o.out);
    const auto* alpha_opt = sub->get_option_no_throw("--alpha");
    const bool alpha_given = alpha_opt != nullptr && alpha_opt->count() > 0;
    const std::string name = sub->get_name();
    if (name == "embed") return cmd_embed(o);
    if (name == "extract") return cmd_extract(o);
    if (name == "attack") return cmd_attack(o);
    if (name == "train") return cmd_train(o);
    if (name == "restore") return cmd_restore(o, alpha_given);
    return cmd_evaluate(o, alpha_given);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(std::move(args));
}

}  // namespace iwn::cli
