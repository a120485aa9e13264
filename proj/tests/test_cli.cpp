#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "quantsr/quantsr.hpp"

namespace {

struct CliResult {
  int code = -1;
  std::string out;
};

// stdout only; logs go to stderr and are discarded
CliResult cli(const std::string& args) {
  const std::string cmd = "QSR_LOG_LEVEL=error " + std::string(QSR_CLI_PATH) + " " + args + " 2>/dev/null";
  CliResult r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli("").code, 1);
  EXPECT_EQ(cli("train-teacher --bogus").code, 1);
  EXPECT_EQ(cli("train -o /tmp/never.ckpt --iters 5").code, 1);  // no --teacher
  EXPECT_EQ(cli("eval").code, 1);
  EXPECT_EQ(cli("infer --model /nonexistent.qsr -i a.png -o b.png").code, 2);
  EXPECT_EQ(cli("--help").code, 0);
}

TEST(Cli, EndToEnd) {
  const auto dir = fixture::temp_dir("cli");
  const std::string d = dir.string();
  ASSERT_EQ(cli("synth -o " + d + "/train --count 3 --size 32 --seed 1 --scale 2").code, 0);
  ASSERT_EQ(cli("synth -o " + d + "/val --count 2 --size 24 --seed 2 --scale 2").code, 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "train" / "HR"));
  EXPECT_TRUE(std::filesystem::exists(dir / "train" / "LR_x2"));
  const std::string data = " --train-dir " + d + "/train/HR --val-dir " + d + "/val/HR --channels 8 --blocks 8 --batch 2 --patch 8 ";

  CliResult t = cli("train-teacher -o " + d + "/teacher.ckpt --iters 20" + data);
  ASSERT_EQ(t.code, 0);
  EXPECT_NE(t.out.find("validation_psnr "), std::string::npos);

  // interrupted run resumed to completion matches an uninterrupted one
  const std::string student = "train --teacher " + d + "/teacher.ckpt --iters 40 --eval-interval 4 --lr 1e-3" + data;
  ASSERT_EQ(cli(student + "-o " + d + "/full.ckpt --log " + d + "/full.csv --events " + d + "/full_events.csv").code, 0);
  ASSERT_EQ(cli(student + "-o " + d + "/part.ckpt --stop-at 15").code, 0);
  ASSERT_EQ(cli("train --resume " + d + "/part.ckpt -o " + d + "/part.ckpt --log " + d + "/part.csv --events " + d +
                "/part_events.csv")
                .code,
            0);
  EXPECT_EQ(slurp(dir / "full.csv"), slurp(dir / "part.csv"));
  EXPECT_EQ(slurp(dir / "full_events.csv"), slurp(dir / "part_events.csv"));
  const std::string events = slurp(dir / "full_events.csv");
  EXPECT_EQ(events.substr(0, events.find('\n')), "iter,event,block_index,alpha,psnr");
  EXPECT_NE(events.find(",finalize,"), std::string::npos);

  ASSERT_EQ(cli("export --ckpt " + d + "/full.ckpt -o " + d + "/model.qsr").code, 0);
  const std::string lr = (dir / "val" / "LR_x2").string();
  const auto first = std::filesystem::directory_iterator(lr)->path().string();
  ASSERT_EQ(cli("infer --model " + d + "/model.qsr -i " + first + " -o " + d + "/sr.png").code, 0);
  const qsr::ImageRGB sr = qsr::load_png(d + "/sr.png");
  const qsr::ImageRGB lr_img = qsr::load_png(first);
  EXPECT_EQ(sr.height, 2 * lr_img.height);

  CliResult e = cli("eval --model " + d + "/model.qsr --data " + d + "/val/HR");
  ASSERT_EQ(e.code, 0);
  EXPECT_EQ(e.out.substr(0, e.out.find('\n')), "image,psnr_db,ssim");
  EXPECT_NE(e.out.find("\nmean,"), std::string::npos);

  CliResult self = cli("eval --sr " + d + "/val/HR --hr " + d + "/val/HR --scale 2");
  ASSERT_EQ(self.code, 0);
  EXPECT_NE(self.out.find("mean,100,1"), std::string::npos) << self.out;

  CliResult rep = cli("report --model " + d + "/model.qsr --json");
  ASSERT_EQ(rep.code, 0);
  const auto j = nlohmann::json::parse(rep.out);
  EXPECT_TRUE(j.is_object());
  std::filesystem::remove_all(dir);
}
