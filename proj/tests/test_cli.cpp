#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "test_support.hpp"

namespace fs = std::filesystem;
using wonham::testing::model_path;

namespace {

struct CliResult {
  int status = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("wonham_cli_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

CliResult run(const std::string& args, const std::string& env = "") {
  const fs::path dir = scratch("io");
  const std::string cmd = env + (env.empty() ? "" : " ") + std::string(WONHAM_CLI) + " " + args + " >" +
                          (dir / "out").string() + " 2>" + (dir / "err").string();
  CliResult r;
  const int raw = std::system(cmd.c_str());
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(dir / "out");
  r.err = slurp(dir / "err");
  return r;
}

}  // namespace

TEST(Cli, HelpListsSubcommands) {
  const CliResult r = run("--help");
  EXPECT_EQ(r.status, 0);
  for (const char* s : {"analyze", "simulate", "filter", "duality-check", "experiment"})
    EXPECT_NE(r.out.find(s), std::string::npos) << s;
}

TEST(Cli, InvalidModelReportsEachIssue) {
  const CliResult r = run("analyze --model " + model_path("bad"));
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("RowSumNonZero"), std::string::npos) << r.err;
}

TEST(Cli, MissingFileIsIoError) {
  EXPECT_EQ(run("analyze --model /nonexistent/model.json").status, 4);
}

TEST(Cli, AnalyzeTwinChain) {
  const CliResult r = run("analyze --model " + model_path("twin"));
  EXPECT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("verdict: not stabilizable"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("witness:"), std::string::npos);

  const CliResult j = run("analyze --json --model " + model_path("twin"));
  ASSERT_EQ(j.status, 0);
  const auto doc = nlohmann::json::parse(j.out);
  EXPECT_EQ(doc["controllable_dim"], 2);
  EXPECT_FALSE(doc["stabilizable"].get<bool>());
  const auto w = doc["witness"].get<std::vector<double>>();
  ASSERT_EQ(w.size(), 4u);
  EXPECT_NEAR(std::abs(w[0]), 0.5, 1e-9);
  EXPECT_NEAR(w[0] + w[2], 0.0, 1e-9);
}

TEST(Cli, AnalyzeStabilizableModel) {
  const CliResult r = run("analyze --json --model " + model_path("sym2"));
  ASSERT_EQ(r.status, 0);
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_TRUE(doc["stabilizable"].get<bool>());
  EXPECT_FALSE(doc.contains("witness"));
}

TEST(Cli, SimulateThenFilter) {
  const fs::path dir = scratch("sim");
  const CliResult s = run("simulate --model " + model_path("asym2") + " --T 1 --dt 0.01 --trials 2 --seed 4 --out " +
                    dir.string());
  ASSERT_EQ(s.status, 0) << s.err;
  ASSERT_TRUE(fs::exists(dir / "trial_1.csv"));
  ASSERT_TRUE(fs::exists(dir / "trial_0_jumps.csv"));
  const std::string trial = slurp(dir / "trial_0.csv");
  EXPECT_NE(trial.find("t,X_t,dZ\n"), std::string::npos);
  EXPECT_EQ(std::count(trial.begin(), trial.end(), '\n'), 102);

  const CliResult f = run("filter --model " + model_path("asym2") + " --obs " + (dir / "trial_0.csv").string());
  ASSERT_EQ(f.status, 0) << f.err;
  EXPECT_NE(f.out.find("t,pi_1,pi_2,dI\n"), std::string::npos);
  EXPECT_NE(f.out.find("\n0,0.5,0.5,0\n"), std::string::npos);
  EXPECT_EQ(std::count(f.out.begin(), f.out.end(), '\n'), 103);

  EXPECT_EQ(run("filter --scheme rk4 --model " + model_path("asym2") + " --obs " + (dir / "trial_0.csv").string())
                .status,
            2);
}

TEST(Cli, DualityCheckReportsJson) {
  const CliResult r = run("duality-check --model " + model_path("sym2") +
                    " --f 0,1 --control sin --T 0.5 --dt 0.01 --trials 500 --seed 2");
  ASSERT_EQ(r.status, 0) << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_TRUE(doc.contains("lhs"));
  EXPECT_TRUE(doc.contains("passed"));
  EXPECT_EQ(run("duality-check --model " + model_path("sym2") + " --f 0,1 --control cos").status, 2);
}

TEST(Cli, ExperimentExitCodes) {
  const fs::path dir = scratch("exp");
  const std::string base = " --T 1 --dt 0.01 --trials 50 --seed 3 --out " + dir.string();
  const CliResult ok = run("experiment splitting --model " + model_path("blocks4") + base);
  EXPECT_EQ(ok.status, 0) << ok.err;
  EXPECT_TRUE(fs::exists(dir / "verdict.json"));
  EXPECT_TRUE(fs::exists(dir / "splitting_max_deviation.csv"));

  // A threshold no curve can meet is a reported violation.
  const CliResult bad = run("experiment stability --model " + model_path("consth") + " --mu 0.7,0.3 --threshold 0" + base);
  EXPECT_EQ(bad.status, 3) << bad.err;

  const CliResult stab = run("experiment necessity --model " + model_path("sym2") + base);
  EXPECT_EQ(stab.status, 2);
  EXPECT_NE(stab.err.find("ModelIsStabilizable"), std::string::npos) << stab.err;

  const CliResult notinv = run("experiment monotonicity --model " + model_path("asym2") + base);
  EXPECT_EQ(notinv.status, 2);
  EXPECT_NE(notinv.err.find("NotInvariantPrior"), std::string::npos) << notinv.err;
}

TEST(Cli, ConfigFileOverridesFlags) {
  const fs::path dir = scratch("cfg");
  {
    std::ofstream cfg(dir / "exp.json");
    cfg << R"({"model": ")" << model_path("detect2") << R"(", "T": 1, "dt": 0.01, "trials": 20, "seed": 8})";
  }
  const CliResult r = run("experiment martingale --config " + (dir / "exp.json").string() + " --T 5 --out " +
                    (dir / "out").string());
  EXPECT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.err.find("warning: --T"), std::string::npos) << r.err;
  const auto doc = nlohmann::json::parse(slurp(dir / "out" / "verdict.json"));
  EXPECT_EQ(doc["T"].get<double>(), 1.0);
}

TEST(Cli, ExperimentCsvIsDeterministicAcrossThreadCounts) {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  // Same output directory name keeps the recorded invocation identical.
  const std::string args = "experiment stability --model " + model_path("asym2") +
                           " --mu 0.9,0.1 --T 1 --dt 0.01 --trials 200 --seed 11 --out det";
  const std::string cd_a = "cd " + a.string() + " &&";
  const std::string cd_b = "cd " + b.string() + " &&";
  ASSERT_EQ(run(args, cd_a + " WONHAM_THREADS=1").status, 0);
  ASSERT_EQ(run(args, cd_b + " WONHAM_THREADS=3").status, 0);
  for (const char* f : {"stability_f1.csv", "stability_f2.csv", "verdict.json"}) {
    const std::string x = slurp(a / "det" / f), y = slurp(b / "det" / f);
    EXPECT_FALSE(x.empty()) << f;
    EXPECT_EQ(x, y) << f;
  }
}
