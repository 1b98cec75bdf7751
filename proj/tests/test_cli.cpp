#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "helpers.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run_cli(const std::string& args) {
  const std::string cmd = std::string(JULE_CLI_PATH) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t got = 0;
  while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void strip_timings(json& j) {
  if (j.is_object()) {
    j.erase("timings");
    for (auto& [k, v] : j.items()) strip_timings(v);
  } else if (j.is_array()) {
    for (auto& v : j) strip_timings(v);
  }
}

const std::string kData = "--data blobs:k=3,n=30,d=2,seed=1 --quiet";

}  // namespace

TEST(Cli, ClusterSeparableBlobs) {
  const auto dir = testing_support::scratch_dir("cli_cluster");
  const auto r = run_cli("cluster " + kData + " --target-nc 3 --out-dir " + dir.string());
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(slurp(dir / "report.json"));
  EXPECT_EQ(j.at("schema_version"), 1);
  EXPECT_DOUBLE_EQ(j.at("results").at("nmi").get<double>(), 1.0);
  EXPECT_EQ(j.at("dataset").at("samples"), 90);
  EXPECT_TRUE(fs::exists(dir / "assignments.csv"));
  EXPECT_TRUE(fs::exists(dir / "trace.json"));
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run_cli("").code, 2);
  EXPECT_EQ(run_cli("cluster " + kData).code, 2);  // no --target-nc
  EXPECT_EQ(run_cli("cluster " + kData + " --target-nc 3 --alpha 0.1").code, 2);
  EXPECT_EQ(run_cli("cluster " + kData + " --target-nc 3 --bogus").code, 2);
  EXPECT_EQ(run_cli("viz " + kData + " --target-nc 3 --out-dim 4").code, 2);
}

TEST(Cli, RuntimeErrorsExitOne) {
  const auto dir = testing_support::scratch_dir("cli_fail");
  EXPECT_EQ(run_cli("jule " + kData + " --target-nc 3 --eta 0 --out-dir " + dir.string()).code, 1);
  EXPECT_EQ(run_cli("cluster --data csv:/nonexistent.csv --target-nc 3 --out-dir " + dir.string()).code, 1);
}

TEST(Cli, AlphaAcceptedWithApproxMode) {
  const auto dir = testing_support::scratch_dir("cli_alpha");
  EXPECT_EQ(run_cli("cluster " + kData + " --target-nc 3 --mode approx --alpha 0.0 --out-dir " + dir.string()).code, 0);
}

TEST(Cli, JointRunReportsBothScoresAndIsReproducible) {
  const auto a = testing_support::scratch_dir("cli_jule_a");
  const auto b = testing_support::scratch_dir("cli_jule_b");
  const std::string args = "jule " + kData + " --target-nc 3 --epochs 2 --eta 0.5 --rc --seed 9 --out-dir ";
  ASSERT_EQ(run_cli(args + a.string()).code, 0);
  ASSERT_EQ(run_cli(args + b.string()).code, 0);
  auto ja = json::parse(slurp(a / "report.json"));
  auto jb = json::parse(slurp(b / "report.json"));
  EXPECT_TRUE(ja.at("results").contains("sf_nmi"));
  EXPECT_TRUE(ja.at("results").contains("rc_nmi"));
  strip_timings(ja);
  strip_timings(jb);
  ja.erase("artifacts");
  jb.erase("artifacts");
  ja["config"].erase("out_dir");
  jb["config"].erase("out_dir");
  EXPECT_EQ(ja, jb);
  EXPECT_EQ(slurp(a / "features.csv"), slurp(b / "features.csv"));
  EXPECT_EQ(slurp(a / "trace.json"), slurp(b / "trace.json"));
}

TEST(Cli, AlphaBenchPutsExactFirst) {
  const auto dir = testing_support::scratch_dir("cli_bench");
  ASSERT_EQ(run_cli("alpha-bench " + kData + " --target-nc 3 --alphas 0,0.1 --out-dir " + dir.string()).code, 0);
  const auto j = json::parse(slurp(dir / "report.json"));
  const auto& rows = j.at("results").at("rows");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].at("mode"), "exact");
}

TEST(Cli, VizWritesEmbedding) {
  const auto dir = testing_support::scratch_dir("cli_viz");
  ASSERT_EQ(run_cli("viz " + kData + " --target-nc 3 --epochs 2 --out-dim 2 --out-dir " + dir.string()).code, 0);
  std::ifstream in(dir / "embedding.csv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 1);
    ++rows;
  }
  EXPECT_EQ(rows, 90u);
}

TEST(Cli, EvalScoresAFile) {
  const auto dir = testing_support::scratch_dir("cli_eval");
  ASSERT_EQ(run_cli("cluster " + kData + " --target-nc 3 --out-dir " + dir.string()).code, 0);
  const auto r = run_cli("eval --pred " + (dir / "assignments.csv").string() + " --data blobs:k=3,n=30,d=2,seed=1");
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  EXPECT_DOUBLE_EQ(j.at("results").at("nmi").get<double>(), 1.0);
}
