#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "support.hpp"

namespace fs = std::filesystem;
using gb_json = nlohmann::json;
using graph_bendr::testing::TempDir;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

// Runs the CLI with stderr discarded; returns exit status and stdout.
Result run(const std::string& args) {
  const std::string cmd = std::string(GRAPH_BENDR_CLI) + " " + args + " 2>/dev/null";
  Result r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe) != nullptr) r.out += buf.data();
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Every regular file under dir, keyed by relative path.
std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return files;
}

void write_tiny_config(const std::string& path) {
  std::ofstream(path) << graph_bendr::testing::tiny_config().to_json().dump(2);
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("synth task --windows -3 --out /tmp/never").code, 2);
  EXPECT_EQ(run("synth task --metric f1 --out /tmp/never").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, SynthTaskCountsAndDeterminism) {
  TempDir dir("cli_task");
  const std::string flags = "synth task --seed 7 --pair C3,C4 --windows 200 --folds 4 --metric auroc --balance 0.3 --name planted";
  ASSERT_EQ(run(flags + " --out " + (dir / "a")).code, 0);
  ASSERT_EQ(run(flags + " --out " + (dir / "b")).code, 0);
  const auto manifest = gb_json::parse(slurp(dir / "a/manifest.json"));
  int pos = 0, neg = 0;
  for (const auto& w : manifest.at("windows")) (w.at("label").get<int>() == 1 ? pos : neg)++;
  EXPECT_EQ(pos, 60);
  EXPECT_EQ(neg, 140);
  EXPECT_EQ(manifest.at("metric"), "auroc");
  EXPECT_EQ(manifest.at("balanced"), false);
  EXPECT_TRUE(tree(dir / "a") == tree(dir / "b"));

  EXPECT_EQ(run("synth task --pair C3,Oz --out " + (dir / "c")).code, 2);
  EXPECT_EQ(run("synth task --balance 1.0 --out " + (dir / "d")).code, 2);
}

TEST(Cli, SynthPretrainIsByteIdentical) {
  TempDir dir("cli_pre");
  const std::string flags = "synth pretrain --seed 7 --recordings 3 --duration 4";
  ASSERT_EQ(run(flags + " --out " + (dir / "a")).code, 0);
  ASSERT_EQ(run(flags + " --out " + (dir / "b")).code, 0);
  const auto a = tree(dir / "a");
  EXPECT_EQ(a.size(), 4u);
  EXPECT_TRUE(a == tree(dir / "b"));
}

TEST(Cli, GraphExport) {
  TempDir dir("cli_graph");
  const auto r = run("graph --out " + (dir / "g"));
  ASSERT_EQ(r.code, 0);
  const std::string csv = slurp(dir / "g/edge_weights.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 19);
  EXPECT_EQ(gb_json::parse(slurp(dir / "g/edge_weights.json")).at("labels").size(), 19u);
  EXPECT_EQ(run("graph --montage " + (dir / "missing.json") + " --out " + (dir / "h")).code, 1);
}

TEST(Cli, PretrainFinetuneGridReport) {
  TempDir dir("cli_flow");
  write_tiny_config(dir / "tiny.json");
  ASSERT_EQ(run("synth pretrain --seed 2 --recordings 2 --duration 6 --sfreq 32 --out " + (dir / "corpus")).code, 0);
  ASSERT_EQ(run("synth task --seed 3 --windows 24 --folds 4 --sfreq 32 --window 3 --band 3,8 --lag 0.0625 --out " +
                (dir / "task"))
                .code,
            0);

  const std::string pre = "pretrain --config " + (dir / "tiny.json") + " --data " + (dir / "corpus") +
                          " --gnn gcn --edge-weights on --steps 3 --out ";
  const auto p1 = run(pre + (dir / "a.ckpt"));
  ASSERT_EQ(p1.code, 0);
  ASSERT_EQ(run(pre + (dir / "b.ckpt")).code, 0);
  EXPECT_TRUE(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));
  const auto summary = gb_json::parse(p1.out);
  EXPECT_EQ(summary.at("model"), "gcn+ew");
  EXPECT_TRUE(fs::exists(dir / "a_curve.csv"));

  const std::string ft = "finetune --checkpoint " + (dir / "a.ckpt") + " --task " + (dir / "task") + " --epochs 1";
  const auto f = run(ft + " --out " + (dir / "result.json"));
  ASSERT_EQ(f.code, 0);
  const auto result = gb_json::parse(slurp(dir / "result.json"));
  EXPECT_EQ(result.at("per_fold").size(), 4u);
  EXPECT_EQ(result.at("model"), "gcn+ew");
  EXPECT_EQ(gb_json::parse(f.out), result);
  EXPECT_EQ(run(ft).out, f.out);

  EXPECT_EQ(run(ft + " --gnn gat").code, 1);
  EXPECT_EQ(run("finetune --checkpoint " + (dir / "absent.ckpt") + " --task " + (dir / "task")).code, 1);

  std::ofstream(dir / "bad.json") << R"({"gnn": {"layer": 2}})";
  EXPECT_EQ(run("pretrain --config " + (dir / "bad.json") + " --data " + (dir / "corpus") + " --out " +
                (dir / "c.ckpt"))
                .code,
            2);
  EXPECT_EQ(run("pretrain --data " + (dir / "corpus") + " --gnn sage --edge-weights on --out " + (dir / "c.ckpt")).code,
            2);

  const auto g = run("grid --checkpoints " + (dir / "a.ckpt") + " --tasks " + (dir / "task") +
                     " --adjusters linear --epochs 1 --out " + (dir / "grid"));
  ASSERT_EQ(g.code, 0);
  EXPECT_EQ(gb_json::parse(g.out).at("cells"), 2);
  ASSERT_EQ(run("report --in " + (dir / "grid") + " --out " + (dir / "rep/table.md")).code, 0);
  EXPECT_NE(slurp(dir / "rep/table.md").find("GCN (w/ e.)"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "rep/table.csv"));
  EXPECT_EQ(run("report --in " + (dir / "empty") + " --out " + (dir / "x.md")).code, 1);
}

TEST(Cli, GradcheckExitCodes) {
  const auto ok = run("gradcheck --all --seed 1");
  EXPECT_EQ(ok.code, 0);
  EXPECT_EQ(gb_json::parse(ok.out).at("pass"), true);
  EXPECT_EQ(run("gradcheck --all --seed 1 --tol 1e-30").code, 3);
}
