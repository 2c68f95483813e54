#include <gtest/gtest.h>

#include <cstdio>
#include <sstream>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "rain/errors.hpp"
#include "run_config.hpp"
#include "test_support.hpp"

namespace rain {
namespace {

using nlohmann::json;
using testing::TempDir;

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr
};

RunResult run(const std::filesystem::path& cwd, const std::string& args) {
  const std::string command = "cd '" + cwd.string() + "' && '" RAIN_CLI "' " + args + " 2>&1";
  RunResult r;
  FILE* pipe = popen(command.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

const std::string kSmall =
    "--set data.synthetic.n_train=40 --set data.synthetic.n_dev=10 --set data.synthetic.n_test=10 "
    "--set model.hidden=8 --set model.embed_dim=8 --set train.epochs=2 --set train.batch_size=8 "
    "--set output.dir=out";

TEST(RunConfig, DefaultsRoundTrip) {
  const cli::RunConfigFile defaults;
  const auto back = cli::run_config_from_json(cli::to_json(defaults));
  EXPECT_EQ(cli::to_json(back), cli::to_json(defaults));
  EXPECT_EQ(back.dictionary_path(), std::filesystem::path("runs/rain/dictionary.json"));
  EXPECT_EQ(back.checkpoint_path(), std::filesystem::path("runs/rain/checkpoint.rain"));
}

TEST(RunConfig, UnknownSectionsAndKeysAreRejected) {
  EXPECT_THROW(cli::run_config_from_json(json{{"modle", json::object()}}), ConfigError);
  EXPECT_THROW(cli::run_config_from_json(json{{"train", {{"epoch", 3}}}}), ConfigError);
  EXPECT_THROW(cli::run_config_from_json(json{{"gradcheck", {{"precision", "quad"}}}}), ConfigError);
}

TEST(RunConfig, OverridesParseJsonWithStringFallback) {
  json node = json::object();
  cli::apply_override(node, "train.epochs=4");
  cli::apply_override(node, "model.emotion_encoder=meanpool");
  cli::apply_override(node, "train.grid_epochs=[1,2]");
  cli::apply_override(node, "output.dir=x/y");
  EXPECT_EQ(node["train"]["epochs"], 4);
  EXPECT_EQ(node["model"]["emotion_encoder"], "meanpool");
  EXPECT_EQ(node["train"]["grid_epochs"], json::array({1, 2}));
  const auto c = cli::run_config_from_json(node);
  EXPECT_EQ(c.train.epochs, 4u);
  EXPECT_EQ(c.model.emotion_encoder, EncoderKind::meanpool);
  EXPECT_EQ(c.output_dir, std::filesystem::path("x/y"));
  EXPECT_THROW(cli::apply_override(node, "no_equals_sign"), ConfigError);
}

TEST(RunConfig, LoadValidates) {
  TempDir dir("cfg");
  testing::write_file(dir / "c.json", R"({"train": {"batch_size": 0}})");
  EXPECT_THROW(cli::load_run_config(dir / "c.json", {}), ConfigError);
  EXPECT_NO_THROW(cli::load_run_config(dir / "c.json", {"train.batch_size=4"}));
  testing::write_file(dir / "broken.json", "{");
  EXPECT_THROW(cli::load_run_config(dir / "broken.json", {}), ConfigError);
}

TEST(Cli, GradcheckOnTheTinyConfigPasses) {
  TempDir dir("gc");
  const auto r = run(dir.path(), "--config '" RAIN_SOURCE_DIR "/configs/tiny.json' gradcheck");
  EXPECT_EQ(r.exit_code, 0) << r.output;
  EXPECT_NE(r.output.find("max relative error"), std::string::npos) << r.output;
}

TEST(Cli, GenDataIsReproducible) {
  TempDir a("gen_a"), b("gen_b");
  ASSERT_EQ(run(a.path(), kSmall + " gen-data").exit_code, 0);
  ASSERT_EQ(run(b.path(), kSmall + " gen-data").exit_code, 0);
  EXPECT_EQ(testing::read_file(a / "data/corpus.jsonl"), testing::read_file(b / "data/corpus.jsonl"));
  EXPECT_EQ(testing::read_file(a / "data/splits.json"), testing::read_file(b / "data/splits.json"));
  EXPECT_FALSE(testing::read_file(a / "data/corpus.jsonl").empty());
}

TEST(Cli, TrainEvalPredictExplain) {
  TempDir dir("pipeline");
  ASSERT_EQ(run(dir.path(), kSmall + " gen-data").exit_code, 0);
  const auto trained = run(dir.path(), kSmall + " train");
  ASSERT_EQ(trained.exit_code, 0) << trained.output;

  std::istringstream csv(testing::read_file(dir / "out/epochs.csv"));
  std::string line;
  std::size_t lines = 0;
  while (std::getline(csv, line)) ++lines;
  EXPECT_EQ(lines, 1u + 2u);

  const auto evaluated = run(dir.path(), kSmall + " eval --split dev");
  ASSERT_EQ(evaluated.exit_code, 0) << evaluated.output;
  const auto report = json::parse(evaluated.output);
  EXPECT_GE(report["intention"]["macro_f1"].get<double>(), 0.0);
  EXPECT_LE(report["emotion"]["macro_f1"].get<double>(), 1.0);

  testing::write_file(dir / "in.jsonl",
                      R"({"id": "x", "utterances": [{"speaker": "A", "text": "could you pass the salt"},)"
                      R"( {"speaker": "B", "text": "sure here it is"}]})"
                      "\n");
  const auto predicted = run(dir.path(), kSmall + " predict --input in.jsonl --output pred.jsonl");
  ASSERT_EQ(predicted.exit_code, 0) << predicted.output;
  const auto out = json::parse(testing::read_file(dir / "pred.jsonl"));
  EXPECT_EQ(out["id"], "x");
  ASSERT_EQ(out["utterances"].size(), 2u);
  for (const auto& u : out["utterances"]) {
    EXPECT_EQ(u["p_intention"].size(), 7u);
    EXPECT_EQ(u["p_emotion"].size(), 6u);
    EXPECT_NO_THROW(parse_intention(u["intention"].get<std::string>()));
    EXPECT_NO_THROW(parse_emotion(u["emotion"].get<std::string>()));
  }

  const auto explained = run(dir.path(), kSmall + " explain --input in.jsonl");
  ASSERT_EQ(explained.exit_code, 0) << explained.output;
  EXPECT_NE(explained.output.find("# x"), std::string::npos);
  EXPECT_NE(explained.output.find("Emotion of A is "), std::string::npos);
  EXPECT_NE(explained.output.find("Emotion of B is "), std::string::npos);

  // Same inputs, same outputs.
  const auto first_ckpt = testing::read_file(dir / "out/checkpoint.rain");
  ASSERT_EQ(run(dir.path(), kSmall + " train").exit_code, 0);
  EXPECT_EQ(testing::read_file(dir / "out/checkpoint.rain"), first_ckpt);
}

TEST(Cli, UnknownLabelIsADataError) {
  TempDir dir("badlabel");
  ASSERT_EQ(run(dir.path(), kSmall + " gen-data").exit_code, 0);
  ASSERT_EQ(run(dir.path(), kSmall + " train").exit_code, 0);
  auto corpus = testing::read_file(dir / "data/corpus.jsonl");
  const auto at = corpus.find("\"emotion\":\"");
  ASSERT_NE(at, std::string::npos);
  const auto end = corpus.find('"', at + 11);
  corpus.replace(at + 11, end - (at + 11), "joyful");
  testing::write_file(dir / "data/corpus.jsonl", corpus);
  const auto r = run(dir.path(), kSmall + " eval");
  EXPECT_EQ(r.exit_code, 3) << r.output;
  EXPECT_NE(r.output.find("joyful"), std::string::npos) << r.output;
}

TEST(Cli, ConfigErrorsExitWithTwo) {
  TempDir dir("cfgerr");
  EXPECT_EQ(run(dir.path(), "--set train.epochz=3 gen-data").exit_code, 2);
  EXPECT_EQ(run(dir.path(), "--config missing.json gen-data").exit_code, 2);
  EXPECT_EQ(run(dir.path(), "no-such-command").exit_code, 2);
}

TEST(Cli, MissingCorpusExitsWithThree) {
  TempDir dir("nocorpus");
  EXPECT_EQ(run(dir.path(), kSmall + " train").exit_code, 3);
}

TEST(Cli, HelpListsEveryCommandAndDefaults) {
  TempDir dir("help");
  const auto r = run(dir.path(), "--help");
  EXPECT_EQ(r.exit_code, 0);
  for (const char* word : {"gen-data", "build-dict", "train", "eval", "ablate", "predict", "explain", "gradcheck",
                           "--split", "test", "--grid"}) {
    EXPECT_NE(r.output.find(word), std::string::npos) << word;
  }
}

}  // namespace
}  // namespace rain
