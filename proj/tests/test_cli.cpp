#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <regex>

#include "cli.hpp"
#include "iwn/data_io.hpp"
#include "iwn/metrics.hpp"
#include "support.hpp"

namespace iwn {
namespace {
namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int line_count(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("iwn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    host = test::fixture("host.png").string();
    mark = test::fixture("mark.png").string();
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string out(const std::string& name) const { return (dir / name).string(); }

  // Small-variant model written straight from the library, for restore/evaluate.
  std::string fresh_checkpoint() const {
    TrainingMeta meta;
    meta.alpha = 0.1;
    const auto path = dir / "fresh.iwn";
    save_checkpoint(make_checkpoint(build_model(ModelConfig::small(), 1), meta), path);
    return path.string();
  }

  std::vector<std::string> short_train(const std::string& out_dir) const {
    return {"train", "--original", host, "--watermark", mark, "--variant", "small", "--epochs", "1",
            "--duplication", "3", "--seed", "11", "--no-stability", "--out", out_dir};
  }

  fs::path dir;
  std::string host, mark;
};

TEST_F(Cli, EmbedReportsPsnrOfWrittenFile) {
  ::testing::internal::CaptureStdout();
  ASSERT_EQ(cli::run({"embed", "--original", host, "--watermark", mark, "--alpha", "0.1", "--out", out("e")}),
            cli::kOk);
  const auto text = ::testing::internal::GetCapturedStdout();
  std::smatch match;
  ASSERT_TRUE(std::regex_search(text, match, std::regex("psnr_db=([0-9.]+)")));
  const double printed = std::stod(match[1]);
  const double recomputed = psnr(load_image(host), load_image(dir / "e" / "watermarked.png"));
  EXPECT_NEAR(printed, recomputed, 1e-6);
  EXPECT_TRUE(fs::exists(dir / "e" / "run_manifest.ini"));
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(cli::run({"embed", "--original", host, "--out", out("a")}), cli::kBadArgs);
  EXPECT_EQ(cli::run({"embed", "--original", host, "--watermark", mark, "--alpha", "0", "--out", out("a")}),
            cli::kBadArgs);
  EXPECT_EQ(cli::run({"frobnicate"}), cli::kBadArgs);
  EXPECT_EQ(cli::run({"attack", "--input", host, "--kind", "blur", "--out", out("a")}), cli::kBadArgs);
  EXPECT_EQ(cli::run({"embed", "--original", out("missing.png"), "--watermark", mark, "--out", out("a")}),
            cli::kIoFailure);
  std::ofstream(dir / "junk.iwn") << "junk";
  EXPECT_EQ(cli::run({"restore", "--checkpoint", out("junk.iwn"), "--input", host, "--original", host, "--out",
                      out("r")}),
            cli::kIoFailure);
  EXPECT_EQ(cli::run({"evaluate", "--checkpoint", fresh_checkpoint(), "--original", host, "--watermark", mark,
                      "--projections", "7", "--out", out("v")}),
            cli::kBadArgs);
}

TEST_F(Cli, ExtractInvertsEmbed) {
  ASSERT_EQ(cli::run({"embed", "--original", host, "--watermark", mark, "--out", out("e")}), cli::kOk);
  ASSERT_EQ(cli::run({"extract", "--input", out("e/watermarked.png"), "--original", host, "--out", out("x")}),
            cli::kOk);
  // Quantizing x_w to 8 bits then dividing by alpha leaves a few levels of error.
  EXPECT_GT(psnr(load_image(dir / "x" / "extracted.png"), load_image(mark)), 25.0);
}

TEST_F(Cli, AttackWritesDeterministicImage) {
  for (const char* sub : {"a1", "a2"})
    ASSERT_EQ(cli::run({"attack", "--input", host, "--kind", "salt_pepper", "--seed", "4", "--out", out(sub)}),
              cli::kOk);
  EXPECT_EQ(slurp(dir / "a1" / "attacked.png"), slurp(dir / "a2" / "attacked.png"));
}

TEST_F(Cli, TrainWritesOneLossRowPerStep) {
  ASSERT_EQ(cli::run(short_train(out("t"))), cli::kOk);
  EXPECT_EQ(line_count(dir / "t" / "loss_log.csv"), 4);
  EXPECT_TRUE(fs::exists(dir / "t" / "model.iwn"));
  EXPECT_TRUE(fs::exists(dir / "t" / "checkpoint_epoch1.iwn"));
  EXPECT_EQ(load_checkpoint(dir / "t" / "model.iwn").meta.loss_history.size(), 3u);
}

TEST_F(Cli, SameSeedGivesByteIdenticalLossLog) {
  ASSERT_EQ(cli::run(short_train(out("t1"))), cli::kOk);
  ASSERT_EQ(cli::run(short_train(out("t2"))), cli::kOk);
  EXPECT_EQ(slurp(dir / "t1" / "loss_log.csv"), slurp(dir / "t2" / "loss_log.csv"));
  EXPECT_EQ(slurp(dir / "t1" / "model.iwn"), slurp(dir / "t2" / "model.iwn"));
}

TEST_F(Cli, EvaluateWritesTwentyRows) {
  const auto ckpt = fresh_checkpoint();
  ::testing::internal::CaptureStdout();
  ASSERT_EQ(cli::run({"evaluate", "--checkpoint", ckpt, "--original", host, "--watermark", mark, "--out", out("v")}),
            cli::kOk);
  const auto text = ::testing::internal::GetCapturedStdout();
  EXPECT_NE(text.find("rows=20"), std::string::npos);
  EXPECT_EQ(line_count(dir / "v" / "eval_report.csv"), 21);
  EXPECT_EQ(line_count(dir / "v" / "projection_curves.csv"), 21);
  const auto doc = nlohmann::json::parse(slurp(dir / "v" / "eval_report.json"));
  EXPECT_EQ(doc["rows"].size(), 20u);

  ASSERT_EQ(cli::run({"evaluate", "--checkpoint", ckpt, "--original", host, "--watermark", mark, "--out", out("w")}),
            cli::kOk);
  EXPECT_EQ(slurp(dir / "v" / "eval_report.csv"), slurp(dir / "w" / "eval_report.csv"));
}

TEST_F(Cli, RestoreScoresAgainstReference) {
  const auto ckpt = fresh_checkpoint();
  ASSERT_EQ(cli::run({"embed", "--original", host, "--watermark", mark, "--out", out("e")}), cli::kOk);
  ::testing::internal::CaptureStdout();
  ASSERT_EQ(cli::run({"restore", "--checkpoint", ckpt, "--input", out("e/watermarked.png"), "--original", host,
                      "--watermark", mark, "--projections", "1", "--out", out("r")}),
            cli::kOk);
  const auto text = ::testing::internal::GetCapturedStdout();
  EXPECT_NE(text.find("unrestored ssim="), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "r" / "restored.png"));
  EXPECT_TRUE(fs::exists(dir / "r" / "extracted.png"));
}

TEST_F(Cli, ManifestReplaysTheRun) {
  ASSERT_EQ(cli::run({"attack", "--input", host, "--kind", "gaussian_noise", "--seed", "8", "--out", out("a")}),
            cli::kOk);
  const auto manifest = slurp(dir / "a" / "run_manifest.ini");
  EXPECT_NE(manifest.find("[attack]"), std::string::npos);
  EXPECT_NE(manifest.find("seed=8"), std::string::npos);

  // Point the replay elsewhere; everything else comes from the manifest.
  ASSERT_EQ(cli::run({"--config", out("a/run_manifest.ini"), "attack", "--out", out("b")}), cli::kOk);
  EXPECT_EQ(slurp(dir / "a" / "attacked.png"), slurp(dir / "b" / "attacked.png"));
}

TEST_F(Cli, SeedFallsBackToEnvironment) {
  ::setenv("IWN_SEED", "8", 1);
  const int code = cli::run({"attack", "--input", host, "--kind", "gaussian_noise", "--out", out("env")});
  ::unsetenv("IWN_SEED");
  ASSERT_EQ(code, cli::kOk);
  ASSERT_EQ(cli::run({"attack", "--input", host, "--kind", "gaussian_noise", "--seed", "8", "--out", out("flag")}),
            cli::kOk);
  EXPECT_EQ(slurp(dir / "env" / "attacked.png"), slurp(dir / "flag" / "attacked.png"));
}

}  // namespace
}  // namespace iwn
