#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "rain/checkpoint.hpp"
#include "rain/corpus.hpp"
#include "rain/errors.hpp"
#include "rain/explain.hpp"
#include "rain/intent_dict.hpp"
#include "rain/model_check.hpp"
#include "rain/synthetic.hpp"
#include "rain/trainer.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using rain::cli::RunConfigFile;

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

rain::Corpus load_corpus(const RunConfigFile& cfg) {
  if (!fs::exists(cfg.data.corpus)) {
    throw rain::DataError("corpus " + cfg.data.corpus.string() + " not found (run gen-data first)");
  }
  if (fs::exists(cfg.data.splits)) return rain::load_jsonl(cfg.data.corpus, cfg.data.splits);
  return rain::load_jsonl(cfg.data.corpus);
}

// Reads dialogues and tokenizes them with a fixed (checkpoint) vocabulary.
rain::Corpus load_with_vocabulary(const fs::path& corpus_path, const fs::path& splits_path,
                                  const rain::Vocabulary& vocab) {
  auto dialogues = rain::read_dialogues_jsonl(corpus_path);
  rain::Splits splits;
  if (!splits_path.empty() && fs::exists(splits_path)) {
    splits = rain::read_splits(splits_path);
  } else {
    for (const auto& d : dialogues) splits.train.push_back(d.id);
  }
  return rain::Corpus(std::move(dialogues), std::move(splits), vocab);
}

// An explicit dict.path is loaded; otherwise the dictionary is rebuilt from
// the train split and written next to the other outputs.
rain::IntentionDictionary obtain_dictionary(const RunConfigFile& cfg, const rain::Corpus& corpus) {
  if (!cfg.dict.path.empty()) return rain::load_intention_dictionary(cfg.dict.path);
  auto dict = rain::build_intention_dictionary(corpus, {cfg.dict.min_count});
  const auto path = cfg.dictionary_path();
  ensure_parent(path);
  rain::save_intention_dictionary(dict, path);
  return dict;
}

rain::Split parse_split(const std::string& name) {
  if (name == "train") return rain::Split::train;
  if (name == "dev") return rain::Split::dev;
  if (name == "test") return rain::Split::test;
  throw rain::ConfigError("unknown split '" + name + "'");
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw rain::DataError("cannot write " + path.string());
  out << text;
}

int cmd_gen_data(const RunConfigFile& cfg) {
  const auto corpus = rain::gen_synthetic(cfg.data.synthetic_seed, cfg.data.synthetic);
  ensure_parent(cfg.data.corpus);
  ensure_parent(cfg.data.splits);
  rain::save_jsonl(corpus, cfg.data.corpus);
  rain::write_splits(corpus.splits(), cfg.data.splits);
  std::cout << "wrote " << corpus.dialogues().size() << " dialogues (" << corpus.size(rain::Split::train) << " train, "
            << corpus.size(rain::Split::dev) << " dev, " << corpus.size(rain::Split::test) << " test) to "
            << cfg.data.corpus.string() << " and " << cfg.data.splits.string() << "\n";
  return 0;
}

int cmd_build_dict(const RunConfigFile& cfg) {
  const auto corpus = load_corpus(cfg);
  const auto dict = rain::build_intention_dictionary(corpus, {cfg.dict.min_count});
  const auto path = cfg.dictionary_path();
  ensure_parent(path);
  rain::save_intention_dictionary(dict, path);
  std::cout << "wrote " << dict.size() << " phrases to " << path.string() << "\n";
  return 0;
}

int cmd_train(const RunConfigFile& cfg, bool grid) {
  const auto corpus = load_corpus(cfg);
  const auto dict = obtain_dictionary(cfg, corpus);
  rain::TrainResult result;
  if (grid) {
    auto g = rain::grid_search(corpus, dict, cfg.model, cfg.train);
    std::string csv = "learning_rate,batch_size,best_epoch,dev_score\n";
    char line[128];
    for (const auto& t : g.trials) {
      std::snprintf(line, sizeof line, "%.9g,%zu,%zu,%.9g\n", t.learning_rate, t.batch_size, t.best_epoch,
                    t.dev_score);
      csv += line;
    }
    write_text(cfg.output_dir / "grid.csv", csv);
    const auto& best = g.trials[g.best];
    std::cout << "grid: best lr " << best.learning_rate << " batch " << best.batch_size << " epoch " << best.best_epoch
              << " (dev score " << best.dev_score << ")\n";
    result = std::move(g.best_result);
  } else {
    rain::TrainOptions options;
    options.on_epoch = [](const rain::EpochRecord& r) {
      std::fprintf(stderr, "epoch %zu  loss %.5f  dev intention F1 %.4f  dev emotion F1 %.4f\n", r.epoch,
                   r.train_loss, r.dev_intention_f1, r.dev_emotion_f1);
    };
    result = rain::train(corpus, dict, cfg.model, cfg.train, options);
  }
  fs::create_directories(cfg.output_dir);
  rain::save_checkpoint(*result.model, corpus.vocabulary(), dict, cfg.checkpoint_path());
  rain::write_epoch_csv(result.history, cfg.output_dir / "epochs.csv");
  std::cout << "best epoch " << result.best_epoch << " (dev score " << result.best_score << "); wrote "
            << cfg.checkpoint_path().string() << " and " << (cfg.output_dir / "epochs.csv").string() << "\n";
  return 0;
}

int cmd_eval(const RunConfigFile& cfg, const std::string& split, const fs::path& checkpoint) {
  const auto which = parse_split(split);
  auto ckpt = rain::load_checkpoint(checkpoint.empty() ? cfg.checkpoint_path() : checkpoint);
  if (!fs::exists(cfg.data.corpus)) throw rain::DataError("corpus " + cfg.data.corpus.string() + " not found");
  const auto corpus = load_with_vocabulary(cfg.data.corpus, cfg.data.splits, ckpt.vocabulary);
  const auto report = rain::evaluate(*ckpt.model, corpus, which, ckpt.dictionary);
  std::cout << rain::to_json(report).dump(2) << "\n";
  return 0;
}

int cmd_ablate(const RunConfigFile& cfg) {
  const auto corpus = load_corpus(cfg);
  const auto dict = obtain_dictionary(cfg, corpus);
  const auto rows = rain::ablate(corpus, dict, cfg.model, cfg.train);
  const auto csv = rain::ablation_csv(rows);
  write_text(cfg.output_dir / "ablation.csv", csv);
  std::cout << csv;
  return 0;
}

struct Predicted {
  rain::PreparedDialogue prepared;
  std::vector<rain::TurnActivations<float>> activations;
};

std::vector<Predicted> run_predictions(const fs::path& input, const rain::Checkpoint& ckpt, rain::Corpus& corpus) {
  corpus = load_with_vocabulary(input, {}, ckpt.vocabulary);
  std::vector<Predicted> out;
  for (const auto& d : corpus.dialogues()) {
    Predicted p;
    p.prepared = rain::prepare(d, &ckpt.dictionary);
    p.activations = ckpt.model->dialogue_forward(p.prepared);
    out.push_back(std::move(p));
  }
  return out;
}

template <class V>
std::vector<double> widen(const V& values) {
  return {values.begin(), values.end()};
}

int cmd_predict(const RunConfigFile& cfg, const fs::path& input, const fs::path& output, const fs::path& checkpoint) {
  const auto ckpt = rain::load_checkpoint(checkpoint.empty() ? cfg.checkpoint_path() : checkpoint);
  rain::Corpus corpus;
  const auto predicted = run_predictions(input, ckpt, corpus);
  std::string text;
  for (std::size_t d = 0; d < predicted.size(); ++d) {
    const auto& dialogue = corpus.dialogues()[d];
    const auto turns = rain::predictions(predicted[d].prepared, predicted[d].activations);
    nlohmann::ordered_json line;
    line["id"] = dialogue.id;
    line["utterances"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < turns.size(); ++i) {
      nlohmann::ordered_json u;
      u["speaker"] = dialogue.utterances[i].speaker;
      u["text"] = dialogue.utterances[i].text;
      u["intention"] = std::string(rain::to_string(turns[i].intention));
      u["emotion"] = std::string(rain::to_string(turns[i].emotion));
      u["p_intention"] = widen(predicted[d].activations[i].y_m);
      u["p_emotion"] = widen(predicted[d].activations[i].y_e);
      line["utterances"].push_back(std::move(u));
    }
    text += line.dump() + "\n";
  }
  write_text(output, text);
  std::cout << "wrote predictions for " << predicted.size() << " dialogues to " << output.string() << "\n";
  return 0;
}

int cmd_explain(const RunConfigFile& cfg, const fs::path& input, const fs::path& output, const fs::path& checkpoint) {
  const auto ckpt = rain::load_checkpoint(checkpoint.empty() ? cfg.checkpoint_path() : checkpoint);
  rain::Corpus corpus;
  const auto predicted = run_predictions(input, ckpt, corpus);
  std::string text;
  for (const auto& p : predicted) {
    text += "# " + p.prepared.id + "\n";
    for (const auto& line : rain::explain(p.prepared, p.activations)) text += line + "\n";
  }
  if (output.empty()) {
    std::cout << text;
  } else {
    write_text(output, text);
    std::cout << "wrote explanations for " << predicted.size() << " dialogues to " << output.string() << "\n";
  }
  return 0;
}

int cmd_gradcheck(const RunConfigFile& cfg) {
  const auto& g = cfg.gradcheck;
  rain::RainConfig model = cfg.model;
  if (model.vocab_size == 0) throw rain::ConfigError("gradcheck needs an explicit model.vocab_size");
  rain::RandomDialogueSpec spec;
  spec.dialogues = g.dialogues;
  spec.utterances = g.utterances;
  spec.vocab_size = model.vocab_size;
  spec.max_tokens = g.max_tokens;
  spec.seed = g.seed;
  rain::diff::GradCheckOptions options;
  options.eps = g.eps;

  const auto start = std::chrono::steady_clock::now();
  const auto dialogues = rain::random_dialogues(spec);
  const auto r = g.precision == "extended" ? rain::check_model_gradients_extended(model, dialogues, options)
                                           : rain::check_model_gradients(model, dialogues, options);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::printf("max relative error %.3e at %s[%zu] (analytic %.6e, numeric %.6e)\n", r.max_relative_error,
              r.worst_param.c_str(), r.worst_index, r.worst_analytic, r.worst_numeric);
  std::printf("%zu entries, %s precision, eps %g, %.2f s\n", r.entries_checked, g.precision.c_str(), g.eps, seconds);
  if (!(r.max_relative_error < g.threshold)) {
    std::printf("FAILED: above threshold %g\n", g.threshold);
    return kExitCheckFailed;
  }
  std::printf("ok: below threshold %g\n", g.threshold);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint intention recognition and emotion prediction for dialogues"};
  app.name("rain");
  app.option_defaults()->always_capture_default();
  app.set_help_flag("--help-one", "Print help for this command only");
  app.set_help_all_flag("-h,--help", "Print help for every command, with defaults");
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "Run configuration JSON; none uses built-in defaults")
      ->default_str("none");
  app.add_option("--set", overrides, "Override one config value, e.g. train.epochs=4 (repeatable)")
      ->default_str("none");

  std::string split = "test";
  std::string checkpoint;
  std::string input;
  std::string output;
  bool grid = false;

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic corpus and its splits");
  auto* build = app.add_subcommand("build-dict", "Build the intention dictionary from the train split");
  auto* train = app.add_subcommand("train", "Train a model; writes checkpoint.rain and epochs.csv");
  train->add_flag("--grid", grid, "Grid search over the train.grid_* lists")->default_str("false");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint; prints metrics JSON");
  eval->add_option("--split", split, "Split to evaluate (train, dev, test)");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint path; none uses <output.dir>/checkpoint.rain")
      ->default_str("none");
  auto* abl = app.add_subcommand("ablate", "Train every ablation variant; writes ablation.csv");
  auto* predict = app.add_subcommand("predict", "Predict labels for unlabeled dialogues");
  predict->add_option("--input", input, "Input dialogues JSONL")->required();
  predict->add_option("--output", output, "Output JSONL")->required();
  predict->add_option("--checkpoint", checkpoint, "Checkpoint path; none uses <output.dir>/checkpoint.rain")
      ->default_str("none");
  auto* expl = app.add_subcommand("explain", "Explain predicted emotions through intention status");
  expl->add_option("--input", input, "Input dialogues JSONL")->required();
  expl->add_option("--output", output, "Output text file; none prints to stdout")
      ->default_str("none");
  expl->add_option("--checkpoint", checkpoint, "Checkpoint path; none uses <output.dir>/checkpoint.rain")
      ->default_str("none");
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the model gradients");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    const auto cfg = rain::cli::load_run_config(config_path, overrides);
    if (*gen) return cmd_gen_data(cfg);
    if (*build) return cmd_build_dict(cfg);
    if (*train) return cmd_train(cfg, grid);
    if (*eval) return cmd_eval(cfg, split, checkpoint);
    if (*abl) return cmd_ablate(cfg);
    if (*predict) return cmd_predict(cfg, input, output, checkpoint);
    if (*expl) return cmd_explain(cfg, input, output, checkpoint);
    if (*gc) return cmd_gradcheck(cfg);
  } catch (const rain::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const rain::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
  return kExitCheckFailed;
}
