#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

#ifndef PROTOSEQ_CLI_PATH
#error "PROTOSEQ_CLI_PATH must be defined by the build"
#endif

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
  const std::string out_file = testing::TempDir() + "cli_out.txt";
  const std::string cmd = std::string(PROTOSEQ_CLI_PATH) + " " + args + " > " + out_file + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out_file);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

std::string work_dir() {
  static std::string dir = [] {
    std::string d = testing::TempDir() + "protoseq_cli_test/";
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Cli, NoSubcommandFails) {
  EXPECT_NE(run_cli("").exit_code, 0);
}

TEST(Cli, UnknownVariantListsValidNamesAndExitsNonzero) {
  RunResult r = run_cli("gradcheck --variant nope");
  EXPECT_NE(r.exit_code, 0);
  EXPECT_NE(r.output.find("protoseq-cnn"), std::string::npos);
  EXPECT_NE(r.output.find("warmproto-crf"), std::string::npos);
}

TEST(Cli, ReservedTransformerVariantRefused) {
  RunResult r = run_cli("gradcheck --variant protoseq-tr");
  EXPECT_NE(r.exit_code, 0);
  EXPECT_NE(r.output.find("reserved"), std::string::npos);
}

TEST(Cli, SynthDeterministicByteIdentical) {
  const std::string a = work_dir() + "synth_a.jsonl";
  const std::string b = work_dir() + "synth_b.jsonl";
  ASSERT_EQ(run_cli("synth --preset separable --conversations 30 --out " + a + " --seed 11").exit_code, 0);
  ASSERT_EQ(run_cli("synth --preset separable --conversations 30 --out " + b + " --seed 11").exit_code, 0);
  EXPECT_EQ(file_bytes(a), file_bytes(b));
  EXPECT_TRUE(fs::exists(a + ".manifest.json"));
}

TEST(Cli, MissingInputPathIsFieldLevelError) {
  RunResult r = run_cli("train --train /nonexistent.jsonl --val x --test y --out " + work_dir() + "o");
  EXPECT_NE(r.exit_code, 0);
  EXPECT_NE(r.output.find("--train"), std::string::npos);
}

TEST(Cli, GradcheckPassesOnDefaultVariant) {
  RunResult r = run_cli("gradcheck --variant protoseq-cnn --seed 3");
  EXPECT_EQ(r.exit_code, 0) << r.output;
  EXPECT_NE(r.output.find("gradcheck PASS"), std::string::npos);
}

TEST(Cli, EndToEndTrainEvalReportSample) {
  const std::string dir = work_dir();
  ASSERT_EQ(run_cli("synth --preset separable --conversations 150 --out " + dir + "train.jsonl --seed 1").exit_code,
            0);
  ASSERT_EQ(run_cli("synth --preset separable --conversations 50 --out " + dir + "val.jsonl --seed 2").exit_code, 0);
  ASSERT_EQ(run_cli("synth --preset separable --conversations 50 --out " + dir + "test.jsonl --seed 3").exit_code, 0);

  nlohmann::json cfg{
      {"model",
       {{"embed_dim", 16}, {"cnn_filters", 8}, {"cnn_widths", {2, 3}}, {"lstm_hidden", 8}, {"mlp_hidden", 16},
        {"proto_dim", 16}}},
      {"train",
       {{"episodes_per_epoch", 25}, {"val_episodes", 10}, {"test_episodes", 30}, {"max_epochs", 16}, {"patience", 6}}},
      {"episode", {{"shots", 2}, {"queries", 3}, {"max_len", 10}}}};
  std::ofstream(dir + "cfg.json") << cfg.dump();

  RunResult train = run_cli("train --config " + dir + "cfg.json --variant protoseq-cnn --train " + dir +
                            "train.jsonl --val " + dir + "val.jsonl --test " + dir + "test.jsonl --out " + dir +
                            "run --seed 7");
  ASSERT_EQ(train.exit_code, 0) << train.output;
  EXPECT_TRUE(fs::exists(dir + "run/model.psqm"));
  EXPECT_TRUE(fs::exists(dir + "run/history.log"));
  EXPECT_TRUE(fs::exists(dir + "run/metrics.json"));
  EXPECT_TRUE(fs::exists(dir + "run/manifest.json"));

  {
    std::ifstream in(dir + "run/manifest.json");
    nlohmann::json manifest = nlohmann::json::parse(in);
    EXPECT_EQ(manifest["seed"], 7);
    EXPECT_TRUE(manifest["inputs"].contains("train"));
    EXPECT_TRUE(manifest["config"].contains("episode"));
  }
  {
    // the separable corpus is fully token-determined, so training must reach
    // a high test score
    std::ifstream in(dir + "run/metrics.json");
    nlohmann::json metrics = nlohmann::json::parse(in);
    EXPECT_GE(metrics["f1_micro"].get<double>(), 0.9) << metrics.dump(2);
  }

  RunResult eval = run_cli("eval --model " + dir + "run/model.psqm --test " + dir + "test.jsonl --episodes 20 --seed 5");
  ASSERT_EQ(eval.exit_code, 0) << eval.output;
  EXPECT_NE(eval.output.find("F1 (micro, pooled)"), std::string::npos);

  RunResult report = run_cli("report --metrics " + dir + "run/metrics.json");
  ASSERT_EQ(report.exit_code, 0) << report.output;
  EXPECT_NE(report.output.find("protoseq-cnn"), std::string::npos);
  EXPECT_NE(report.output.find("precision"), std::string::npos);

  RunResult sample = run_cli("sample --train " + dir + "train.jsonl --shots 1 --queries 1 --max-len 10 --seed 2");
  ASSERT_EQ(sample.exit_code, 0) << sample.output;
  // first line is the episode header, then one json object per conversation
  std::istringstream lines(sample.output);
  std::string line;
  std::getline(lines, line);
  nlohmann::json header = nlohmann::json::parse(line);
  EXPECT_EQ(header["type"], "episode");
  int support = 0, query = 0;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    nlohmann::json obj = nlohmann::json::parse(line);
    if (obj["type"] == "support") ++support;
    if (obj["type"] == "query") ++query;
  }
  EXPECT_EQ(support, 3);
  EXPECT_EQ(query, 3);
}

TEST(Cli, EvalRefusesMismatchedLabelSet) {
  const std::string dir = work_dir();
  ASSERT_EQ(
      run_cli("synth --preset separable --labels 4 --conversations 50 --out " + dir + "other.jsonl --seed 9").exit_code,
      0);
  RunResult r = run_cli("eval --model " + dir + "run/model.psqm --test " + dir + "other.jsonl --episodes 5");
  EXPECT_NE(r.exit_code, 0);
  EXPECT_NE(r.output.find("label set"), std::string::npos);
}

TEST(Cli, SeedEnvVarFallback) {
  const std::string dir = work_dir();
  const std::string out1 = dir + "env_a.jsonl";
  const std::string out2 = dir + "env_b.jsonl";
  ASSERT_EQ(std::system((std::string("PROTOSEQ_SEED=321 ") + PROTOSEQ_CLI_PATH +
                         " synth --preset separable --conversations 20 --out " + out1 + " > /dev/null 2>&1")
                            .c_str()),
            0);
  ASSERT_EQ(run_cli("synth --preset separable --conversations 20 --out " + out2 + " --seed 321").exit_code, 0);
  EXPECT_EQ(file_bytes(out1), file_bytes(out2));
}

TEST(Cli, TransitionPresetAlternatesLabels) {
  const std::string path = work_dir() + "trans.jsonl";
  ASSERT_EQ(run_cli("synth --preset transition --conversations 20 --out " + path + " --seed 13").exit_code, 0);
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    nlohmann::json conv = nlohmann::json::parse(line);
    std::string prev;
    for (const nlohmann::json& m : conv["messages"]) {
      std::string label = m["label"];
      if (!prev.empty()) EXPECT_NE(label, prev);  // deterministic alternation
      prev = label;
    }
  }
}
