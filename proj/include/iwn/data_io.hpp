#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "iwn/backbone.hpp"
#include "iwn/image.hpp"
#include "iwn/objectives.hpp"

namespace iwn {

inline constexpr int kModelImageSize = 128;

/// Decodes PNG/BMP/JPEG, converts to RGB (grayscale replicated), scales to
/// [0, 1] and bilinearly resizes to target (height, width). Images already at
/// the target size are not resampled. Throws UnreadableFile.
Image load_image(const std::filesystem::path& path, std::pair<int, int> target_size = {kModelImageSize, kModelImageSize});

/// Writes an 8-bit image (format from the extension; PNG recommended).
/// Values are clipped and rounded to the nearest 1/255. Throws Io.
void save_image(const Image& img, const std::filesystem::path& path);

struct DatasetManifest {
  std::string name;
  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> entries;  ///< (original, watermark)
};

/// Plain-text manifest: `# name: <name>` header and one
/// `<original> <watermark>` pair per line; relative paths resolve against the
/// manifest's directory. Throws Io for missing files.
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Every image in `dir` (sorted by name) paired with the same watermark.
DatasetManifest manifest_from_directory(const std::filesystem::path& dir, const std::filesystem::path& watermark);

struct TrainingMeta {
  int epoch = 0;
  std::int64_t step = 0;
  std::uint64_t seed = 0;
  double alpha = 0.1;
  std::vector<LossBreakdown> loss_history;

  friend bool operator==(const TrainingMeta&, const TrainingMeta&) = default;
};

struct Checkpoint {
  ModelConfig model_config;
  ParameterSet<float> parameters;
  TrainingMeta meta;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

Checkpoint make_checkpoint(const Model& m, TrainingMeta meta);
Model model_from_checkpoint(const Checkpoint& ckpt);

/// Single-file container: magic "IWN1", format version, a JSON header with
/// the model config, metadata and parameter shapes, then raw little-endian
/// float32 parameter data and float64 loss history.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Throws Io for unreadable/truncated files and ShapeMismatch when stored
/// shapes disagree with the config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace iwn
