#include "iwn/data_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <sstream>

#include "iwn/error.hpp"

namespace iwn {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'I', 'W', 'N', '1'};
constexpr std::uint32_t kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

json config_to_json(const ModelConfig& c) {
  return json{{"variant", std::string(to_string(c.variant))},
              {"image_size", c.image_size},
              {"image_channels", c.image_channels},
              {"encoder_channels", c.encoder_channels},
              {"encoder_kernels", c.encoder_kernels},
              {"encoder_strides", c.encoder_strides},
              {"encoder_paddings", c.encoder_paddings},
              {"encoder_norm", c.encoder_norm},
              {"decoder_channels", c.decoder_channels},
              {"decoder_kernels", c.decoder_kernels},
              {"decoder_strides", c.decoder_strides},
              {"decoder_paddings", c.decoder_paddings},
              {"decoder_norm", c.decoder_norm},
              {"norm_groups", c.norm_groups},
              {"leaky_slope", c.leaky_slope}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.variant = parse_variant(j.at("variant").get<std::string>()).value_or(Variant::Custom);
  j.at("image_size").get_to(c.image_size);
  j.at("image_channels").get_to(c.image_channels);
  j.at("encoder_channels").get_to(c.encoder_channels);
  j.at("encoder_kernels").get_to(c.encoder_kernels);
  j.at("encoder_strides").get_to(c.encoder_strides);
  j.at("encoder_paddings").get_to(c.encoder_paddings);
  c.encoder_norm = j.at("encoder_norm").get<std::vector<bool>>();
  j.at("decoder_channels").get_to(c.decoder_channels);
  j.at("decoder_kernels").get_to(c.decoder_kernels);
  j.at("decoder_strides").get_to(c.decoder_strides);
  j.at("decoder_paddings").get_to(c.decoder_paddings);
  c.decoder_norm = j.at("decoder_norm").get<std::vector<bool>>();
  j.at("norm_groups").get_to(c.norm_groups);
  j.at("leaky_slope").get_to(c.leaky_slope);
  return c;
}

template <class T>
void write_raw(std::ostream& out, const T* data, std::size_t n) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(T)));
}

template <class T>
void read_raw(std::istream& in, T* data, std::size_t n, const fs::path& path) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(T)));
  if (!in) throw Error(ErrorKind::Io, "truncated checkpoint: " + path.string());
}

}  // namespace

Image load_image(const fs::path& path, std::pair<int, int> target_size) {
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (raw.empty()) throw Error(ErrorKind::UnreadableFile, "cannot decode image: " + path.string());
  cv::Mat rgb;
  cv::cvtColor(raw, rgb, cv::COLOR_BGR2RGB);
  cv::Mat real;
  rgb.convertTo(real, CV_64FC3, 1.0 / 255.0);
  const auto [th, tw] = target_size;
  if (th <= 0 || tw <= 0) throw Error(ErrorKind::ShapeMismatch, "target size must be positive");
  if (real.rows != th || real.cols != tw) {
    cv::Mat resized;
    cv::resize(real, resized, cv::Size(tw, th), 0.0, 0.0, cv::INTER_LINEAR);
    real = resized;
  }
  Image img(th, tw, 3);
  for (int y = 0; y < th; ++y) {
    const auto* row = real.ptr<cv::Vec3d>(y);
    for (int x = 0; x < tw; ++x)
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = row[x][c];
  }
  img.clip();
  return img;
}

void save_image(const Image& img, const fs::path& path) {
  if (img.channels() != 1 && img.channels() != 3) throw Error(ErrorKind::ShapeMismatch, "save_image needs 1 or 3 channels");
  const int channels = img.channels();
  cv::Mat mat(img.height(), img.width(), channels == 1 ? CV_8UC1 : CV_8UC3);
  for (int y = 0; y < img.height(); ++y) {
    auto* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < channels; ++c) {
        const double v = std::isnan(img.at(c, y, x)) ? 0.0 : std::clamp(img.at(c, y, x), 0.0, 1.0);
        row[x * channels + (channels == 3 ? 2 - c : c)] = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
  }
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), mat);
  } catch (const cv::Exception& e) {
    throw Error(ErrorKind::Io, "cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw Error(ErrorKind::Io, "cannot write " + path.string());
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open manifest: " + path.string());
  DatasetManifest m;
  m.name = path.stem().string();
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path r(p);
    if (r.is_relative()) r = base / r;
    if (!fs::exists(r)) throw Error(ErrorKind::Io, "manifest entry not found: " + r.string());
    return r;
  };
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("# name:", 0) == 0) {
      m.name = line.substr(7);
      m.name.erase(0, m.name.find_first_not_of(' '));
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string original, watermark;
    if (!(fields >> original >> watermark)) throw Error(ErrorKind::Io, "malformed manifest line: " + line);
    m.entries.emplace_back(resolve(original), resolve(watermark));
  }
  return m;
}

DatasetManifest manifest_from_directory(const fs::path& dir, const fs::path& watermark) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "not a directory: " + dir.string());
  if (!fs::exists(watermark)) throw Error(ErrorKind::Io, "watermark not found: " + watermark.string());
  DatasetManifest m;
  m.name = dir.filename().string();
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".png" || ext == ".bmp" || ext == ".jpg" || ext == ".jpeg") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (auto& f : files)
    if (fs::absolute(f) != fs::absolute(watermark)) m.entries.emplace_back(f, watermark);
  return m;
}

Checkpoint make_checkpoint(const Model& m, TrainingMeta meta) {
  meta.step = m.step();
  return Checkpoint{m.config(), m.parameters(), std::move(meta)};
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
  return Model(ckpt.model_config, ckpt.parameters, ckpt.meta.step);
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  json header;
  header["model_config"] = config_to_json(ckpt.model_config);
  header["meta"] = {{"epoch", ckpt.meta.epoch},
                    {"step", ckpt.meta.step},
                    {"seed", ckpt.meta.seed},
                    {"alpha", ckpt.meta.alpha},
                    {"loss_history_len", ckpt.meta.loss_history.size()}};
  json params = json::array();
  for (const auto& p : ckpt.parameters) params.push_back({{"name", p.name}, {"shape", p.shape}});
  header["parameters"] = params;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write checkpoint: " + path.string());
  out.write(kMagic, 4);
  write_raw(out, &kFormatVersion, 1);
  const std::uint64_t header_len = text.size();
  write_raw(out, &header_len, 1);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : ckpt.parameters) write_raw(out, p.values.data(), p.values.size());
  for (const auto& l : ckpt.meta.loss_history) {
    const double row[6] = {l.l_rec, l.l_idem, l.l_tight, l.l_wm, l.l_origin, l.total};
    write_raw(out, row, 6);
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open checkpoint: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw Error(ErrorKind::Io, "not an IWN1 checkpoint: " + path.string());
  std::uint32_t version = 0;
  read_raw(in, &version, 1, path);
  if (version != kFormatVersion) throw Error(ErrorKind::Io, "unsupported checkpoint version " + std::to_string(version));
  std::uint64_t header_len = 0;
  read_raw(in, &header_len, 1, path);
  if (header_len > (1u << 26)) throw Error(ErrorKind::Io, "corrupt checkpoint header length");
  std::string text(header_len, '\0');
  read_raw(in, text.data(), header_len, path);

  Checkpoint ckpt;
  std::size_t history_len = 0;
  json header;
  try {
    header = json::parse(text);
    ckpt.model_config = config_from_json(header.at("model_config"));
    const auto& meta = header.at("meta");
    meta.at("epoch").get_to(ckpt.meta.epoch);
    meta.at("step").get_to(ckpt.meta.step);
    meta.at("seed").get_to(ckpt.meta.seed);
    meta.at("alpha").get_to(ckpt.meta.alpha);
    meta.at("loss_history_len").get_to(history_len);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Io, std::string("corrupt checkpoint header: ") + e.what());
  }

  std::vector<std::pair<std::string, std::vector<int>>> layout;
  try {
    layout = parameter_layout(ckpt.model_config);
  } catch (const Error& e) {
    throw Error(ErrorKind::ShapeMismatch, std::string("stored config is invalid: ") + e.what());
  }
  const auto& stored = header.at("parameters");
  if (stored.size() != layout.size()) throw Error(ErrorKind::ShapeMismatch, "parameter count differs from config");
  for (std::size_t i = 0; i < layout.size(); ++i) {
    Parameter<float> p;
    p.name = stored[i].at("name").get<std::string>();
    p.shape = stored[i].at("shape").get<std::vector<int>>();
    if (p.name != layout[i].first || p.shape != layout[i].second) {
      throw Error(ErrorKind::ShapeMismatch, "stored parameter '" + p.name + "' does not match the config");
    }
    std::size_t n = 1;
    for (int d : p.shape) n *= static_cast<std::size_t>(d);
    p.values.resize(n);
    read_raw(in, p.values.data(), n, path);
    ckpt.parameters.push_back(std::move(p));
  }
  ckpt.meta.loss_history.resize(history_len);
  for (auto& l : ckpt.meta.loss_history) {
    double row[6];
    read_raw(in, row, 6, path);
    l = {row[0], row[1], row[2], row[3], row[4], row[5]};
  }
  return ckpt;
}

}  // namespace iwn
