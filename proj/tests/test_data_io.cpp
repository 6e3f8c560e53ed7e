#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "iwn/data_io.hpp"
#include "iwn/error.hpp"
#include "iwn/trainer.hpp"
#include "support.hpp"

namespace iwn {
namespace {
namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("iwn_data_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  fs::path dir;
};

TEST_F(TempDir, LargePngIsResizedInRange) {
  cv::Mat big(512, 512, CV_8UC3);
  cv::randu(big, 0, 256);
  cv::imwrite((dir / "big.png").string(), big);
  const auto img = load_image(dir / "big.png");
  EXPECT_EQ(img.height(), 128);
  EXPECT_EQ(img.width(), 128);
  EXPECT_EQ(img.channels(), 3);
  for (double v : img.pixels()) {
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
}

TEST_F(TempDir, ExactSizeIsNotResampled) {
  cv::Mat src(128, 128, CV_8UC3);
  cv::randu(src, 0, 256);
  cv::imwrite((dir / "exact.png").string(), src);
  const auto img = load_image(dir / "exact.png");
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) {
      const auto bgr = src.at<cv::Vec3b>(y, x);
      for (int c = 0; c < 3; ++c) ASSERT_NEAR(img.at(c, y, x), bgr[2 - c] / 255.0, 1e-6);
    }
}

TEST_F(TempDir, GrayscaleIsReplicated) {
  cv::Mat gray(40, 60, CV_8UC1);
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 60; ++x) gray.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(4 * x);
  cv::imwrite((dir / "gray.png").string(), gray);
  const auto img = load_image(dir / "gray.png", {40, 60});
  ASSERT_EQ(img.channels(), 3);
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 60; ++x) {
      EXPECT_EQ(img.at(0, y, x), img.at(1, y, x));
      EXPECT_EQ(img.at(0, y, x), img.at(2, y, x));
      EXPECT_NEAR(img.at(0, y, x), 4 * x / 255.0, 1e-12);
    }
}

TEST_F(TempDir, UnreadableFile) {
  std::ofstream(dir / "junk.png") << "not an image";
  for (const auto& p : {dir / "junk.png", dir / "missing.png"}) {
    try {
      load_image(p);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::UnreadableFile);
    }
  }
}

TEST_F(TempDir, SaveLoadRoundTripWithinOneLevel) {
  const auto img = test::random_image(128, 128, 3, 3);
  save_image(img, dir / "r.png");
  EXPECT_LE(max_abs_diff(load_image(dir / "r.png"), img), 0.5 / 255.0 + 1e-6);
}

TEST_F(TempDir, ExtremesSurviveRoundTrip) {
  for (double v : {0.0, 1.0}) {
    save_image(Image(128, 128, 3, v), dir / "e.png");
    const auto back = load_image(dir / "e.png");
    for (double p : back.pixels()) ASSERT_EQ(p, v);
  }
}

TEST_F(TempDir, UnwritablePath) {
  try {
    save_image(Image(8, 8, 3), dir / "no" / "such" / "dir" / "x.png");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
}

TEST_F(TempDir, ManifestResolvesRelativePaths) {
  fs::copy_file(test::fixture("host.png"), dir / "a.png");
  fs::copy_file(test::fixture("mark.png"), dir / "w.png");
  std::ofstream(dir / "set.txt") << "# name: tiny\n\na.png w.png\n";
  const auto m = load_manifest(dir / "set.txt");
  EXPECT_EQ(m.name, "tiny");
  ASSERT_EQ(m.entries.size(), 1u);
  EXPECT_EQ(m.entries[0].first, dir / "a.png");
  EXPECT_EQ(m.entries[0].second, dir / "w.png");

  std::ofstream(dir / "bad.txt") << "a.png gone.png\n";
  EXPECT_THROW(load_manifest(dir / "bad.txt"), Error);
}

TEST_F(TempDir, ManifestFromDirectory) {
  fs::create_directories(dir / "set");
  fs::copy_file(test::fixture("host.png"), dir / "set" / "b.png");
  fs::copy_file(test::fixture("host.png"), dir / "set" / "a.png");
  std::ofstream(dir / "set" / "notes.txt") << "skip";
  const auto m = manifest_from_directory(dir / "set", test::fixture("mark.png"));
  ASSERT_EQ(m.entries.size(), 2u);
  EXPECT_EQ(m.entries[0].first.filename(), "a.png");
  EXPECT_EQ(m.entries[1].first.filename(), "b.png");
}

TEST_F(TempDir, CheckpointRoundTripFreshModel) {
  const auto model = build_model(test::toy_config(), 5);
  TrainingMeta meta;
  meta.seed = 17;
  const auto ckpt = make_checkpoint(model, meta);
  save_checkpoint(ckpt, dir / "m.iwn");
  const auto back = load_checkpoint(dir / "m.iwn");
  EXPECT_EQ(back, ckpt);
  const auto restored = model_from_checkpoint(back);
  const auto x = test::random_image(8, 8, 3, 1);
  EXPECT_EQ(forward(restored, x), forward(model, x));
}

TEST_F(TempDir, CheckpointKeepsLossHistoryAfterTraining) {
  TrainConfig cfg;
  cfg.model = test::toy_config();
  cfg.epochs = 1;
  cfg.duplication = 10;
  cfg.record_stability = false;
  const auto x = test::smooth_image(8, 8, 3, 1), w = test::random_image(8, 8, 3, 2);
  const auto result = train(x, w, cfg);
  ASSERT_EQ(result.checkpoint.meta.loss_history.size(), 10u);
  save_checkpoint(result.checkpoint, dir / "t.iwn");
  const auto back = load_checkpoint(dir / "t.iwn");
  EXPECT_EQ(back.meta, result.checkpoint.meta);
  EXPECT_EQ(back.parameters, result.checkpoint.parameters);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST_F(TempDir, TamperedShapeIsRejected) {
  save_checkpoint(make_checkpoint(build_model(test::toy_config(), 5), {}), dir / "m.iwn");
  auto bytes = slurp(dir / "m.iwn");
  const std::string from = "\"shape\":[8,3,4,4]", to = "\"shape\":[8,3,4,5]";
  const auto pos = bytes.find(from);
  ASSERT_NE(pos, std::string::npos);
  bytes.replace(pos, from.size(), to);
  std::ofstream(dir / "bad.iwn", std::ios::binary) << bytes;
  try {
    load_checkpoint(dir / "bad.iwn");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
}

TEST_F(TempDir, TruncatedOrForeignFilesAreIoErrors) {
  save_checkpoint(make_checkpoint(build_model(test::toy_config(), 5), {}), dir / "m.iwn");
  const auto bytes = slurp(dir / "m.iwn");
  std::ofstream(dir / "short.iwn", std::ios::binary) << bytes.substr(0, bytes.size() - 10);
  std::ofstream(dir / "foreign.iwn", std::ios::binary) << "PK\x03\x04 something else";
  for (const auto& p : {dir / "short.iwn", dir / "foreign.iwn", dir / "missing.iwn"}) {
    try {
      load_checkpoint(p);
      FAIL() << p;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Io) << p;
    }
  }
}

}  // namespace
}  // namespace iwn
