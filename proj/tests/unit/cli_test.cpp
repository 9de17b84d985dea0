#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "denoiserank/error.hpp"
#include "run_config.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"

namespace denoiserank::cli {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(const std::string& args, const fs::path& stdout_file) {
  const std::string cmd =
      std::string(DENOISERANK_CLI_PATH) + " " + args + " > " + stdout_file.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(RunConfig, DefaultsAndPresets) {
  RunConfig c;
  EXPECT_EQ(c.get_int("epochs"), 200);
  EXPECT_EQ(c.get_int("batch_size"), 128);
  EXPECT_DOUBLE_EQ(c.get_real("lr"), 1e-3);
  c.apply_preset("istella");
  EXPECT_EQ(c.get_int("timesteps"), 600);
  EXPECT_EQ(c.get_int("denoise_layers"), 8);
  EXPECT_EQ(c.get("loss"), "mse");
  c.apply_preset("web30k");
  EXPECT_EQ(c.get_int("timesteps"), 1000);
  EXPECT_EQ(c.get_int("denoise_layers"), 2);
  EXPECT_EQ(c.get("loss"), "listnet");
  EXPECT_TRUE(c.get_bool("use_attention"));
  const TrainConfig t = c.train_config();
  EXPECT_EQ(t.schedule.kind, ScheduleKind::kTruncatedLinear);
  EXPECT_EQ(t.loss.kind, LossKind::kListNet);
  EXPECT_THROW(c.apply_preset("mslr"), ConfigError);
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
  RunConfig c;
  EXPECT_THROW(c.set("learning_rate", "0.1"), ConfigError);
  EXPECT_THROW(c.set("epochs", "ten"), ConfigError);
  EXPECT_THROW(c.set("dropout", "x"), ConfigError);
  EXPECT_THROW(c.set("schedule", "quadratic"), ConfigError);
  EXPECT_THROW(c.assign("epochs"), ConfigError);
  c.assign("epochs=7");
  EXPECT_EQ(c.get_int("epochs"), 7);
}

TEST(RunConfig, SnapshotRoundTrips) {
  RunConfig c;
  c.apply_preset("yahoo");
  c.set("seed", "42");
  c.set("cutoffs", "1,10,ALL");
  testing::TempDir dir;
  std::ofstream(dir / "snap.cfg") << c.snapshot();
  RunConfig back;
  back.load_file(dir / "snap.cfg");
  EXPECT_EQ(back.snapshot(), c.snapshot());
  EXPECT_EQ(back.cutoffs().size(), 3u);
}

TEST(RunConfig, FileErrorsCarryTheLine) {
  testing::TempDir dir;
  std::ofstream(dir / "bad.cfg") << "# comment\nepochs = 3\nnot_a_key = 1\n";
  RunConfig c;
  try {
    c.load_file(dir / "bad.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.cfg:3"), std::string::npos) << e.what();
  }
}

class CliBinary : public ::testing::Test {
 protected:
  void SetUp() override {
    testing::write_letor(testing::linear_dataset({12, 8, 5, 1}), dir_ / "train.txt");
    testing::write_letor(testing::linear_dataset({4, 8, 5, 2}), dir_ / "valid.txt");
    testing::write_letor(testing::linear_dataset({4, 8, 5, 3}), dir_ / "test.txt");
  }

  std::string prepare_args(const fs::path& out) const {
    return "prepare --train " + (dir_ / "train.txt").string() + " --valid " +
           (dir_ / "valid.txt").string() + " --test " + (dir_ / "test.txt").string() +
           " --out-dir " + out.string();
  }

  std::string tiny_model() const {
    return " --set epochs=2 --set batch_size=4 --set d_model=8 --set heads=2 --set blocks=1"
           " --set timesteps=20 --set eval_every=1 --set valid_reverse_steps=4 ";
  }

  testing::TempDir dir_;
};

TEST_F(CliBinary, PrepareIsDeterministic) {
  ASSERT_EQ(run(prepare_args(dir_ / "a"), dir_ / "a.out"), 0) << slurp(dir_ / "a.out");
  ASSERT_EQ(run(prepare_args(dir_ / "b"), dir_ / "b.out"), 0);
  EXPECT_NE(slurp(dir_ / "a.out").find("checksum"), std::string::npos);
  for (const char* name : {"train.cache", "valid.cache", "test.cache"}) {
    EXPECT_EQ(slurp(dir_ / "a" / name), slurp(dir_ / "b" / name)) << name;
  }
  auto strip_paths = [&](std::string s, const std::string& out) {
    for (auto pos = s.find(out); pos != std::string::npos; pos = s.find(out)) s.erase(pos, out.size());
    return s;
  };
  EXPECT_EQ(strip_paths(slurp(dir_ / "a.out"), (dir_ / "a").string()),
            strip_paths(slurp(dir_ / "b.out"), (dir_ / "b").string()));
}

TEST_F(CliBinary, ExitCodes) {
  std::ofstream(dir_ / "empty.txt").close();
  EXPECT_EQ(run("prepare --train " + (dir_ / "empty.txt").string() + " --out-dir " +
                    (dir_ / "e").string(),
                dir_ / "e.out"),
            3)
      << slurp(dir_ / "e.out");
  EXPECT_EQ(run("train --set train_cache=" + (dir_ / "missing.cache").string() +
                    " --set valid_cache=" + (dir_ / "missing.cache").string() + " --out-dir " +
                    (dir_ / "m").string(),
                dir_ / "m.out"),
            3)
      << slurp(dir_ / "m.out");
  EXPECT_FALSE(fs::exists(dir_ / "m" / "best.ckpt"));
  std::ofstream(dir_ / "bad.cfg") << "nonsense_key = 4\n";
  EXPECT_EQ(run("train --config " + (dir_ / "bad.cfg").string(), dir_ / "c.out"), 2);
  EXPECT_EQ(run("train --set epochs=abc", dir_ / "c2.out"), 2);
  EXPECT_EQ(run("frobnicate", dir_ / "c3.out"), 2);
  EXPECT_EQ(run("--help", dir_ / "h.out"), 0);
}

TEST_F(CliBinary, TrainEvaluateInferDiversity) {
  const fs::path data = dir_ / "data";
  ASSERT_EQ(run(prepare_args(data), dir_ / "p.out"), 0) << slurp(dir_ / "p.out");
  const std::string caches = " --set train_cache=" + (data / "train.cache").string() +
                             " --set valid_cache=" + (data / "valid.cache").string() +
                             " --set test_cache=" + (data / "test.cache").string();
  const fs::path run_dir = dir_ / "run";
  ASSERT_EQ(run("train" + tiny_model() + caches + " --out-dir " + run_dir.string(), dir_ / "t.out"), 0)
      << slurp(dir_ / "t.out");
  ASSERT_TRUE(fs::exists(run_dir / "best.ckpt"));
  EXPECT_FALSE(slurp(run_dir / "train_log.jsonl").empty());
  EXPECT_FALSE(slurp(run_dir / "config.resolved").empty());

  const std::string ckpt = " --checkpoint " + (run_dir / "best.ckpt").string();
  ASSERT_EQ(run("evaluate" + tiny_model() + caches + ckpt + " --cutoffs 1,5,10 --reverse-steps 4"
                " --out-dir " + run_dir.string(),
                dir_ / "ev.out"),
            0)
      << slurp(dir_ / "ev.out");
  const std::string csv = slurp(run_dir / "eval.csv");
  std::size_t ndcg_rows = 0;
  for (std::size_t pos = csv.find("\nNDCG,"); pos != std::string::npos; pos = csv.find("\nNDCG,", pos + 1)) {
    ++ndcg_rows;
  }
  EXPECT_EQ(ndcg_rows, 3u) << csv;

  ASSERT_EQ(run("infer" + tiny_model() + ckpt + " --reverse-steps 4 --input " +
                    (data / "test.cache").string() + " --output " + (dir_ / "scores.tsv").string(),
                dir_ / "in.out"),
            0)
      << slurp(dir_ / "in.out");
  const std::string tsv = slurp(dir_ / "scores.tsv");
  EXPECT_EQ(std::count(tsv.begin(), tsv.end(), '\n'), 1 + 4 * 8);

  ASSERT_EQ(run("diversity" + tiny_model() + caches + ckpt +
                    " --k-list 1,5 --repeat 3 --reverse-steps 4 --out-dir " + run_dir.string(),
                dir_ / "d.out"),
            0)
      << slurp(dir_ / "d.out");
  EXPECT_EQ(slurp(run_dir / "diversity.csv").rfind("K,M,rsd,ndcg_mean,ndcg_single,n_queries\n", 0), 0u);
}

TEST_F(CliBinary, GradcheckPasses) {
  EXPECT_EQ(run("gradcheck --trials 3", dir_ / "g.out"), 0) << slurp(dir_ / "g.out");
}

}  // namespace
}  // namespace denoiserank::cli
