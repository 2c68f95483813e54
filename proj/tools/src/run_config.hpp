#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rain/model.hpp"
#include "rain/synthetic.hpp"
#include "rain/trainer.hpp"

namespace rain::cli {

struct DataSection {
  std::filesystem::path corpus = "data/corpus.jsonl";
  std::filesystem::path splits = "data/splits.json";
  std::uint64_t synthetic_seed = 2024;
  SyntheticOptions synthetic;
};

struct DictSection {
  // Empty means <output.dir>/dictionary.json.
  std::filesystem::path path;
  std::size_t min_count = 2;
};

struct GradcheckSection {
  std::size_t dialogues = 2;
  std::size_t utterances = 3;
  std::size_t max_tokens = 5;
  std::uint64_t seed = 0;
  double eps = 1e-4;
  double threshold = 1e-4;
  // "double" or "extended"
  std::string precision = "double";
};

struct RunConfigFile {
  DataSection data;
  DictSection dict;
  RainConfig model;
  TrainConfig train;
  std::filesystem::path output_dir = "runs/rain";
  GradcheckSection gradcheck;

  std::filesystem::path dictionary_path() const {
    return dict.path.empty() ? output_dir / "dictionary.json" : dict.path;
  }
  std::filesystem::path checkpoint_path() const { return output_dir / "checkpoint.rain"; }
};

nlohmann::json to_json(const RunConfigFile& config);

// Strict: unknown sections or keys raise ConfigError.
RunConfigFile run_config_from_json(const nlohmann::json& node);

// "a.b.c=value"; the value is parsed as JSON and falls back to a plain string.
void apply_override(nlohmann::json& node, const std::string& assignment);

// Reads the file (empty path: all defaults), applies the overrides, validates.
RunConfigFile load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides);

}  // namespace rain::cli
