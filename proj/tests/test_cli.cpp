#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {
int run(const std::string& args) {
  const std::string cmd = std::string(TCPLR_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

fs::path scratch() {
  auto d = fs::temp_directory_path() / "tcplr_cli_test";
  fs::create_directories(d);
  return d;
}

fs::path write(const std::string& name, const std::string& body) {
  const auto p = scratch() / name;
  std::ofstream(p) << body;
  return p;
}
}  // namespace

TEST(Cli, AnalyticTableSucceeds) {
  const auto out = scratch() / "t1.csv";
  EXPECT_EQ(run("analytic --table T1 --out " + out.string()), 0);
  EXPECT_GT(fs::file_size(out), 0u);
}

TEST(Cli, OracleGridSucceeds) {
  const auto grid = write("g.txt", "algo = prr, qarr\nor = off, on\nn = 10\n");
  EXPECT_EQ(run("oracle --grid " + grid.string() + " --out " + (scratch() / "o.csv").string()), 0);
}

TEST(Cli, SimulateWritesSelfDescribingFiles) {
  const auto cfg = write("sim.cfg", "loss = burst:10@2000\nduration_s = 3\n");
  const auto dir = scratch() / "simout";
  ASSERT_EQ(run("simulate --config " + cfg.string() + " --out " + dir.string()), 0);
  std::ifstream in(dir / "summary.csv");
  std::string first;
  std::getline(in, first);
  EXPECT_EQ(first.rfind("# rate_mbps", 0), 0u);
  EXPECT_TRUE(fs::exists(dir / "episodes.csv"));
}

TEST(Cli, ConfigErrorExitsTwo) {
  const auto cfg = write("bad.cfg", "warp_factor = 9\n");
  EXPECT_EQ(run("simulate --config " + cfg.string() + " --out " + (scratch() / "x").string()), 2);
  EXPECT_EQ(run("table --id T99"), 2);
  EXPECT_EQ(run("simulate --config /nonexistent/file.cfg --out /tmp/x"), 2);
}

TEST(Cli, MissingSubcommandExitsTwo) { EXPECT_EQ(run(""), 2); }
