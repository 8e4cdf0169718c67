#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"

namespace fs = std::filesystem;
using tritcal::cli::parse_and_dispatch;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
  double seconds = 0.0;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "tritcal");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  o.code = parse_and_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("tritcal_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    cfg_ = (dir_ / "small.cfg").string();
    std::ofstream(cfg_) << "grid_size = 10\nmax_epochs = 5\npatience = 5\nlayers = 12 32 32 4\n"
                           "test_repetitions = 5\ntest_size = 20\n";
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void make_model() {
    ASSERT_EQ(run({"gen-dataset", "-c", cfg_, "--grid", "10", "--seed", "7", "-o", path("d.csv")}).code, 0);
    ASSERT_EQ(run({"train", "-c", cfg_, "-i", path("d.csv"), "--epochs", "5", "-o", path("m.ckpt")}).code, 0);
  }

  fs::path dir_;
  std::string cfg_;
};

}  // namespace

TEST_F(Cli, HelpDocumentsSubcommands) {
  const auto o = run({"--help"});
  EXPECT_EQ(o.code, 0);
  for (const char* sub : {"simulate", "gen-dataset", "train", "predict", "evaluate", "sweep-grid", "ablate-kicks",
                          "epoch-curves", "surface"}) {
    EXPECT_NE(o.out.find(sub), std::string::npos) << sub;
  }
  const auto t = run({"train", "--help"});
  EXPECT_EQ(t.code, 0);
  EXPECT_NE(t.out.find("--epochs"), std::string::npos);
}

TEST_F(Cli, Simulate) {
  const auto o = run({"simulate", "--v1", "0", "--v2", "0", "--counts", "1000", "--seed", "3"});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("p11 = 1\n"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("counts ="), std::string::npos);
}

TEST_F(Cli, GenDatasetRowCount) {
  const auto o = run({"gen-dataset", "--grid", "10", "--kick-steps", "5", "--counts", "1000", "--seed", "7", "-o",
                      path("d.csv")});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(o.out, "examples = 100\n");
  std::ifstream in(path("d.csv"));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) rows += (!line.empty() && line[0] != '#') ? 1 : 0;
  EXPECT_EQ(rows, 101u);
  EXPECT_LT(o.seconds, 60.0);
}

TEST_F(Cli, TrainPredictEvaluateSurface) {
  make_model();
  EXPECT_TRUE(fs::exists(path("m.ckpt")));
  EXPECT_TRUE(fs::exists(path("m.ckpt.report.txt")));
  EXPECT_TRUE(fs::exists(path("m.ckpt.epochs.csv")));

  const auto p = run({"predict", "-m", path("m.ckpt"), "--probs",
                      "0.5,0.2,0.3,0.1,0.6,0.3,0.2,0.2,0.6,0.3,0.3,0.4"});
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_NE(p.out.find("v1 = "), std::string::npos);
  EXPECT_NE(p.out.find("consistency_residual = "), std::string::npos);

  const auto e = run({"evaluate", "-c", cfg_, "-m", path("m.ckpt"), "--seed", "2", "-o", path("eval")});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_NE(e.out.find("n_repetitions = 5"), std::string::npos) << e.out;
  EXPECT_TRUE(fs::exists(path("eval/report.txt")));

  const auto s = run({"surface", "-c", cfg_, "--resolution", "11", "-m", path("m.ckpt"), "-o", path("surf")});
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_TRUE(fs::exists(path("surf/results.csv")));
  EXPECT_TRUE(fs::exists(path("surf/predictions.csv")));
  EXPECT_LT(e.seconds + s.seconds + p.seconds, 60.0);
}

TEST_F(Cli, TrainFromMeasurementFile) {
  const auto s = run({"surface", "--resolution", "12", "-o", path("surf")});
  ASSERT_EQ(s.code, 0);
  std::ofstream(path("meas.csv")) << slurp(path("surf/results.csv"));
  const auto t = run({"train", "-c", cfg_, "-i", path("meas.csv"), "--kick-steps", "2", "-o", path("x.ckpt")});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_NE(t.out.find("examples = 100"), std::string::npos) << t.out;
  EXPECT_NE(t.err.find("dropped 44"), std::string::npos) << t.err;
}

TEST_F(Cli, Harnesses) {
  auto o = run({"sweep-grid", "-c", cfg_, "--sizes", "6,10", "--trainings", "2", "--epochs", "3", "-o", path("sweep")});
  ASSERT_EQ(o.code, 0) << o.err;
  for (const char* f : {"config.echo", "results.csv", "report.txt", "runs.csv"}) {
    EXPECT_TRUE(fs::exists(dir_ / "sweep" / f)) << f;
  }
  EXPECT_LT(o.seconds, 60.0);

  o = run({"ablate-kicks", "-c", cfg_, "--epochs", "3", "-o", path("abl")});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("full.improvement"), std::string::npos);
  EXPECT_NE(o.out.find("subrange.improvement"), std::string::npos);
  EXPECT_LT(o.seconds, 60.0);

  o = run({"epoch-curves", "-c", cfg_, "--epochs", "4", "-o", path("curves")});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("epochs_run = 4"), std::string::npos) << o.out;
  EXPECT_LT(o.seconds, 60.0);
}

TEST_F(Cli, IdenticalCommandsIdenticalArtifacts) {
  make_model();
  const auto first = slurp(path("m.ckpt")) + slurp(path("m.ckpt.report.txt")) + slurp(path("m.ckpt.epochs.csv"));
  const auto data = slurp(path("d.csv"));
  make_model();
  EXPECT_EQ(slurp(path("d.csv")), data);
  EXPECT_EQ(slurp(path("m.ckpt")) + slurp(path("m.ckpt.report.txt")) + slurp(path("m.ckpt.epochs.csv")), first);
}

TEST_F(Cli, ConfigOverridesAndFlagsWin) {
  std::ofstream(path("g.cfg")) << "grid_size = 4\n";
  auto o = run({"gen-dataset", "-c", path("g.cfg"), "-o", path("a.csv")});
  EXPECT_EQ(o.out, "examples = 16\n");
  o = run({"gen-dataset", "-c", path("g.cfg"), "--set", "grid_size=5", "-o", path("a.csv")});
  EXPECT_EQ(o.out, "examples = 25\n");
  o = run({"gen-dataset", "-c", path("g.cfg"), "--set", "grid_size=5", "--grid", "6", "-o", path("a.csv")});
  EXPECT_EQ(o.out, "examples = 36\n");
}

TEST_F(Cli, ConfigDirectoryFromEnvironment) {
  std::ofstream(path("tritcal.cfg")) << "grid_size = 3\n";
  setenv("TRITCAL_CONFIG_DIR", dir_.c_str(), 1);
  const auto o = run({"gen-dataset", "-o", path("a.csv")});
  unsetenv("TRITCAL_CONFIG_DIR");
  EXPECT_EQ(o.out, "examples = 9\n");
}

TEST_F(Cli, DistinctExitCodes) {
  EXPECT_EQ(run({"train", "--bogus-flag"}).code, tritcal::cli::kUsage);
  EXPECT_EQ(run({}).code, tritcal::cli::kUsage);

  const auto missing = run({"train", "-i", path("nope.csv"), "-o", path("m.ckpt")});
  EXPECT_EQ(missing.code, tritcal::cli::kIo);
  EXPECT_EQ(missing.err.rfind("error[io]: ", 0), 0u) << missing.err;

  std::ofstream(path("bad.csv")) << "a,b,c\n1,2,3\n";
  EXPECT_EQ(run({"train", "-i", path("bad.csv"), "-o", path("m.ckpt")}).code, tritcal::cli::kSchema);

  EXPECT_EQ(run({"gen-dataset", "--grid", "1", "-o", path("x.csv")}).code, tritcal::cli::kInvalidParameter);
  EXPECT_EQ(run({"gen-dataset", "--set", "nonsense_key=1", "-o", path("x.csv")}).code, tritcal::cli::kSchema);

  make_model();
  auto text = slurp(path("m.ckpt"));
  text.resize(text.size() / 2);
  std::ofstream(path("m.ckpt"), std::ios::binary) << text;
  const auto corrupt = run({"predict", "-m", path("m.ckpt"), "--probs", "0,0,1,0,0,1,0,0,1,0,0,1"});
  EXPECT_EQ(corrupt.code, tritcal::cli::kCorruptCheckpoint);
  EXPECT_EQ(corrupt.err.rfind("error[checksum]: ", 0), 0u) << corrupt.err;

  make_model();
  EXPECT_EQ(run({"predict", "-m", path("m.ckpt"), "--probs", "0.5,0.5"}).code, tritcal::cli::kShapeMismatch);
}
