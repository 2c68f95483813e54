#include "run_config.hpp"

#include <fstream>
#include <sstream>

#include "rain/errors.hpp"

namespace rain::cli {

using nlohmann::json;

namespace {

template <class V>
void read_value(const json& node, const std::string& where, V& dst) {
  try {
    dst = node.get<V>();
  } catch (const json::exception&) {
    throw ConfigError(where + " has the wrong type");
  }
}

void require_object(const json& node, const std::string& where) {
  if (!node.is_object()) throw ConfigError(where + " must be an object");
}

void apply_synthetic(DataSection& d, const json& node) {
  require_object(node, "data.synthetic");
  for (const auto& [key, value] : node.items()) {
    const std::string where = "data.synthetic." + key;
    if (key == "seed") read_value(value, where, d.synthetic_seed);
    else if (key == "n_train") read_value(value, where, d.synthetic.n_train);
    else if (key == "n_dev") read_value(value, where, d.synthetic.n_dev);
    else if (key == "n_test") read_value(value, where, d.synthetic.n_test);
    else if (key == "min_turns") read_value(value, where, d.synthetic.min_turns);
    else if (key == "max_turns") read_value(value, where, d.synthetic.max_turns);
    else throw ConfigError("unknown key '" + where + "'");
  }
}

void apply_data(DataSection& d, const json& node) {
  require_object(node, "data");
  for (const auto& [key, value] : node.items()) {
    std::string path;
    if (key == "corpus") {
      read_value(value, "data.corpus", path);
      d.corpus = path;
    } else if (key == "splits") {
      read_value(value, "data.splits", path);
      d.splits = path;
    } else if (key == "synthetic") {
      apply_synthetic(d, value);
    } else {
      throw ConfigError("unknown key 'data." + key + "'");
    }
  }
}

void apply_dict(DictSection& d, const json& node) {
  require_object(node, "dict");
  for (const auto& [key, value] : node.items()) {
    if (key == "path") {
      std::string path;
      read_value(value, "dict.path", path);
      d.path = path;
    } else if (key == "min_count") {
      read_value(value, "dict.min_count", d.min_count);
    } else {
      throw ConfigError("unknown key 'dict." + key + "'");
    }
  }
}

void apply_output(RunConfigFile& c, const json& node) {
  require_object(node, "output");
  for (const auto& [key, value] : node.items()) {
    if (key != "dir") throw ConfigError("unknown key 'output." + key + "'");
    std::string dir;
    read_value(value, "output.dir", dir);
    c.output_dir = dir;
  }
}

void apply_gradcheck(GradcheckSection& g, const json& node) {
  require_object(node, "gradcheck");
  for (const auto& [key, value] : node.items()) {
    const std::string where = "gradcheck." + key;
    if (key == "dialogues") read_value(value, where, g.dialogues);
    else if (key == "utterances") read_value(value, where, g.utterances);
    else if (key == "max_tokens") read_value(value, where, g.max_tokens);
    else if (key == "seed") read_value(value, where, g.seed);
    else if (key == "eps") read_value(value, where, g.eps);
    else if (key == "threshold") read_value(value, where, g.threshold);
    else if (key == "precision") read_value(value, where, g.precision);
    else throw ConfigError("unknown key '" + where + "'");
  }
}

void validate(const RunConfigFile& c) {
  RainConfig model = c.model;
  if (model.vocab_size == 0) model.vocab_size = 2;  // filled from the corpus later
  model.validate();
  c.train.validate();
  if (c.dict.min_count == 0) throw ConfigError("dict.min_count must be positive");
  const auto& s = c.data.synthetic;
  if (s.min_turns == 0 || s.min_turns > s.max_turns) throw ConfigError("data.synthetic turn range is empty");
  if (s.n_train == 0) throw ConfigError("data.synthetic.n_train must be positive");
  const auto& g = c.gradcheck;
  if (g.dialogues == 0 || g.utterances == 0 || g.max_tokens == 0) {
    throw ConfigError("gradcheck sizes must be positive");
  }
  if (!(g.eps > 0.0) || !(g.threshold > 0.0)) throw ConfigError("gradcheck eps and threshold must be positive");
  if (g.precision != "double" && g.precision != "extended") {
    throw ConfigError("gradcheck.precision must be 'double' or 'extended'");
  }
}

}  // namespace

json to_json(const RunConfigFile& c) {
  const auto& s = c.data.synthetic;
  return {
      {"data",
       {{"corpus", c.data.corpus.string()},
        {"splits", c.data.splits.string()},
        {"synthetic",
         {{"seed", c.data.synthetic_seed},
          {"n_train", s.n_train},
          {"n_dev", s.n_dev},
          {"n_test", s.n_test},
          {"min_turns", s.min_turns},
          {"max_turns", s.max_turns}}}}},
      {"dict", {{"path", c.dict.path.string()}, {"min_count", c.dict.min_count}}},
      {"model", to_json(c.model)},
      {"train", to_json(c.train)},
      {"output", {{"dir", c.output_dir.string()}}},
      {"gradcheck",
       {{"dialogues", c.gradcheck.dialogues},
        {"utterances", c.gradcheck.utterances},
        {"max_tokens", c.gradcheck.max_tokens},
        {"seed", c.gradcheck.seed},
        {"eps", c.gradcheck.eps},
        {"threshold", c.gradcheck.threshold},
        {"precision", c.gradcheck.precision}}},
  };
}

RunConfigFile run_config_from_json(const json& node) {
  require_object(node, "config");
  RunConfigFile c;
  for (const auto& [key, value] : node.items()) {
    if (key == "data") apply_data(c.data, value);
    else if (key == "dict") apply_dict(c.dict, value);
    else if (key == "model") apply_rain_config_json(c.model, value);
    else if (key == "train") apply_train_config_json(c.train, value);
    else if (key == "output") apply_output(c, value);
    else if (key == "gradcheck") apply_gradcheck(c.gradcheck, value);
    else throw ConfigError("unknown section '" + key + "'");
  }
  validate(c);
  return c;
}

void apply_override(json& node, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  json* target = &node;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("--set key '" + key + "' has an empty component");
    if (target->is_null()) *target = json::object();
    if (!target->is_object()) throw ConfigError("--set key '" + key + "' descends into a non-object");
    target = &(*target)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  json value = json::parse(raw, nullptr, false);
  *target = value.is_discarded() ? json(raw) : std::move(value);
}

RunConfigFile load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  json node = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    node = json::parse(buf.str(), nullptr, false);
    if (node.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
  }
  for (const auto& o : overrides) apply_override(node, o);
  return run_config_from_json(node);
}

}  // namespace rain::cli
