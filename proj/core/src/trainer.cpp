#include "rain/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <future>
#include <numeric>
#include <random>
#include <sstream>

#include "rain/errors.hpp"

namespace rain {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("train.learning_rate must be >= 0");
  if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (epochs == 0) throw ConfigError("train.epochs must be >= 1");
  if (threads == 0) throw ConfigError("train.threads must be >= 1");
  if (grid_learning_rates.empty() || grid_batch_sizes.empty() || grid_epochs.empty()) {
    throw ConfigError("grid lists must be non-empty");
  }
  for (double lr : grid_learning_rates) {
    if (!(lr > 0.0)) throw ConfigError("grid learning rates must be positive");
  }
  for (auto b : grid_batch_sizes) {
    if (b == 0) throw ConfigError("grid batch sizes must be positive");
  }
  for (auto e : grid_epochs) {
    if (e == 0) throw ConfigError("grid epochs must be positive");
  }
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.eps > 0.0)) {
    throw ConfigError("invalid Adam hyperparameters");
  }
}

json to_json(const TrainConfig& c) {
  json node;
  node["learning_rate"] = c.learning_rate;
  node["batch_size"] = c.batch_size;
  node["epochs"] = c.epochs;
  node["seed"] = c.seed;
  node["grid_learning_rates"] = c.grid_learning_rates;
  node["grid_batch_sizes"] = c.grid_batch_sizes;
  node["grid_epochs"] = c.grid_epochs;
  node["adam_beta1"] = c.adam.beta1;
  node["adam_beta2"] = c.adam.beta2;
  node["adam_eps"] = c.adam.eps;
  node["threads"] = c.threads;
  return node;
}

void apply_train_config_json(TrainConfig& c, const json& node) {
  if (!node.is_object()) throw ConfigError("train section must be an object");
  auto get = [](const json& v, const std::string& key, auto& dst) {
    try {
      dst = v.get<std::decay_t<decltype(dst)>>();
    } catch (const json::exception&) {
      throw ConfigError("train." + key + " has the wrong type");
    }
  };
  for (const auto& [key, value] : node.items()) {
    if (key == "learning_rate") get(value, key, c.learning_rate);
    else if (key == "batch_size") get(value, key, c.batch_size);
    else if (key == "epochs") get(value, key, c.epochs);
    else if (key == "seed") get(value, key, c.seed);
    else if (key == "grid_learning_rates") get(value, key, c.grid_learning_rates);
    else if (key == "grid_batch_sizes") get(value, key, c.grid_batch_sizes);
    else if (key == "grid_epochs") get(value, key, c.grid_epochs);
    else if (key == "adam_beta1") get(value, key, c.adam.beta1);
    else if (key == "adam_beta2") get(value, key, c.adam.beta2);
    else if (key == "adam_eps") get(value, key, c.adam.eps);
    else if (key == "threads") get(value, key, c.threads);
    else throw ConfigError("unknown train key '" + key + "'");
  }
}

double selection_score(const MetricsReport& report, const RainConfig& config) {
  if (config.flags.multi_task) return report.mean_f1();
  return config.single_task == SingleTask::intention ? report.intention.macro_f1 : report.emotion.macro_f1;
}

RainConfig resolve_config(RainConfig config, const Corpus& corpus) {
  if (config.vocab_size == 0) {
    config.vocab_size = corpus.vocabulary().size();
  } else if (config.vocab_size != corpus.vocabulary().size()) {
    throw ConfigError("model.vocab_size " + std::to_string(config.vocab_size) + " does not match the corpus vocabulary (" +
                      std::to_string(corpus.vocabulary().size()) + ")");
  }
  return config;
}

namespace {

template <class V>
std::size_t argmax(const std::vector<V>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

void check_finite_grads(const diff::ParameterStore<float>& store) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    for (const float g : store[i].grad) {
      if (!std::isfinite(g)) throw NonFiniteError("non-finite gradient in '" + store[i].name + "'");
    }
  }
}

}  // namespace

MetricsReport evaluate(const RainModel<float>& model, const std::vector<PreparedDialogue>& dialogues) {
  std::vector<std::size_t> gold_m, pred_m, gold_e, pred_e;
  for (const auto& d : dialogues) {
    auto acts = model.dialogue_forward(d);
    for (std::size_t i = 0; i < acts.size(); ++i) {
      const auto& u = d.utterances[i];
      if (!u.intention || !u.emotion) {
        throw DataError("utterance " + std::to_string(i) + " of dialogue '" + d.id + "' lacks gold labels");
      }
      gold_m.push_back(index(*u.intention));
      gold_e.push_back(index(*u.emotion));
      pred_m.push_back(argmax(acts[i].y_m));
      pred_e.push_back(argmax(acts[i].y_e));
    }
  }
  if (gold_m.empty()) throw DataError("cannot evaluate an empty split");
  MetricsReport report;
  report.intention = compute_metrics(gold_m, pred_m, label_names(kIntentionNames));
  report.emotion = compute_metrics(gold_e, pred_e, label_names(kEmotionNames));
  return report;
}

MetricsReport evaluate(const RainModel<float>& model, const Corpus& corpus, Split split,
                       const IntentionDictionary& dict) {
  return evaluate(model, prepare(corpus.split(split), &dict));
}

double dataset_loss(const RainModel<float>& model, const std::vector<PreparedDialogue>& dialogues) {
  if (dialogues.empty()) throw DataError("cannot compute the loss of an empty split");
  double total = 0.0;
  for (const auto& d : dialogues) {
    diff::Tape<float> tape;
    auto turns = model.forward(tape, d);
    auto l = model.loss(tape, turns, d, 1);
    total += l.total.scalar();
  }
  return total / static_cast<double>(dialogues.size());
}

TrainResult train(const Corpus& corpus, const IntentionDictionary& dict, const RainConfig& model_config,
                  const TrainConfig& train_config, const TrainOptions& options) {
  train_config.validate();
  const RainConfig config = resolve_config(model_config, corpus);
  auto train_set = prepare(corpus.split(Split::train), &dict);
  auto dev_set = prepare(corpus.split(Split::dev), &dict);
  if (train_set.empty()) throw DataError("train split is empty");
  if (dev_set.empty()) throw DataError("dev split is empty");

  TrainResult result;
  result.model = std::make_unique<RainModel<float>>(config);
  auto& model = *result.model;
  auto& store = model.params();
  Adam<float> adam(store, train_config.learning_rate, train_config.adam);

  std::mt19937_64 rng(train_config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<std::vector<float>> best_values;
  bool have_best = false;
  for (std::size_t epoch = 1; epoch <= train_config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += train_config.batch_size) {
      const std::size_t end = std::min(order.size(), start + train_config.batch_size);
      const std::size_t k = end - start;
      store.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t b = start; b < end; ++b) {
        const auto& d = train_set[order[b]];
        diff::Tape<float> tape;
        auto turns = model.forward(tape, d);
        auto l = model.loss(tape, turns, d, k);
        batch_loss += static_cast<double>(l.total.scalar());
        tape.backward(l.total);
      }
      if (!std::isfinite(batch_loss)) {
        throw NonFiniteError("non-finite training loss at epoch " + std::to_string(epoch));
      }
      check_finite_grads(store);
      adam.step();
      loss_sum += batch_loss;
      ++batches;
    }

    auto dev = evaluate(model, dev_set);
    EpochRecord rec{epoch, loss_sum / static_cast<double>(batches), dev.intention.macro_f1, dev.emotion.macro_f1};
    result.history.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);

    const double score = selection_score(dev, config);
    if (epoch >= options.select_from_epoch && (!have_best || score > result.best_score)) {
      have_best = true;
      result.best_score = score;
      result.best_epoch = epoch;
      best_values.clear();
      for (std::size_t i = 0; i < store.size(); ++i) best_values.push_back(store[i].value);
    }
  }
  if (have_best) {
    for (std::size_t i = 0; i < store.size(); ++i) store[i].value = best_values[i];
  }
  store.zero_grad();
  return result;
}

std::string epoch_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream out;
  out << "epoch,train_loss,dev_intention_f1,dev_emotion_f1\n";
  char line[160];
  for (const auto& e : history) {
    std::snprintf(line, sizeof line, "%zu,%.9g,%.9g,%.9g\n", e.epoch, e.train_loss, e.dev_intention_f1,
                  e.dev_emotion_f1);
    out << line;
  }
  return out.str();
}

void write_epoch_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << epoch_csv(history);
}

namespace {

// Runs jobs with at most `threads` in flight; results keep job order.
template <class R>
std::vector<R> run_parallel(std::vector<std::function<R()>> jobs, std::size_t threads) {
  std::vector<R> results;
  results.reserve(jobs.size());
  if (threads <= 1) {
    for (auto& job : jobs) results.push_back(job());
    return results;
  }
  for (std::size_t start = 0; start < jobs.size(); start += threads) {
    std::vector<std::future<R>> inflight;
    for (std::size_t i = start; i < std::min(jobs.size(), start + threads); ++i) {
      inflight.push_back(std::async(std::launch::async, jobs[i]));
    }
    for (auto& f : inflight) results.push_back(f.get());
  }
  return results;
}

}  // namespace

GridResult grid_search(const Corpus& corpus, const IntentionDictionary& dict, const RainConfig& model_config,
                       const TrainConfig& train_config) {
  train_config.validate();
  const auto [min_e, max_e] = std::minmax_element(train_config.grid_epochs.begin(), train_config.grid_epochs.end());
  std::vector<std::function<std::shared_ptr<TrainResult>()>> jobs;
  GridResult grid;
  for (double lr : train_config.grid_learning_rates) {
    for (std::size_t batch : train_config.grid_batch_sizes) {
      TrainConfig tc = train_config;
      tc.learning_rate = lr;
      tc.batch_size = batch;
      tc.epochs = *max_e;
      const std::size_t from = *min_e;
      grid.trials.push_back({lr, batch, 0, 0.0});
      jobs.emplace_back([&corpus, &dict, model_config, tc, from] {
        TrainOptions opts;
        opts.select_from_epoch = from;
        return std::make_shared<TrainResult>(train(corpus, dict, model_config, tc, opts));
      });
    }
  }
  auto results = run_parallel(std::move(jobs), train_config.threads);
  for (std::size_t i = 0; i < results.size(); ++i) {
    grid.trials[i].best_epoch = results[i]->best_epoch;
    grid.trials[i].dev_score = results[i]->best_score;
    if (results[i]->best_score > results[grid.best]->best_score) grid.best = i;
  }
  grid.best_result = std::move(*results[grid.best]);
  return grid;
}

std::vector<AblationVariant> ablation_variants() {
  AblationFlags none{false, false, false, false};
  auto with = [none](auto setter) {
    AblationFlags f = none;
    setter(f);
    return f;
  };
  return {
      {"base", none, true},
      {"+dictionary", with([](AblationFlags& f) { f.use_dict = true; }), true},
      {"+fusion", with([](AblationFlags& f) { f.use_fusion = true; }), false},
      {"+history", with([](AblationFlags& f) { f.use_history = true; }), true},
      {"+multi-task", with([](AblationFlags& f) { f.multi_task = true; }), true},
      {"full", AblationFlags{true, true, true, true}, true},
  };
}

namespace {

std::vector<const Dialogue*> report_split(const Corpus& corpus) {
  auto test = corpus.split(Split::test);
  return test.empty() ? corpus.split(Split::dev) : test;
}

}  // namespace

std::pair<double, double> train_variant(const Corpus& corpus, const IntentionDictionary& dict,
                                        const RainConfig& model_config, const TrainConfig& train_config,
                                        const AblationFlags& flags, bool need_intention) {
  auto eval_set = prepare(report_split(corpus), &dict);
  RainConfig c = model_config;
  c.flags = flags;
  if (flags.multi_task) {
    auto r = train(corpus, dict, c, train_config);
    auto m = evaluate(*r.model, eval_set);
    return {m.intention.macro_f1, m.emotion.macro_f1};
  }
  double f1_m = 0.0;
  if (need_intention) {
    c.single_task = SingleTask::intention;
    auto r = train(corpus, dict, c, train_config);
    f1_m = evaluate(*r.model, eval_set).intention.macro_f1;
  }
  c.single_task = SingleTask::emotion;
  auto r = train(corpus, dict, c, train_config);
  return {f1_m, evaluate(*r.model, eval_set).emotion.macro_f1};
}

std::vector<AblationRow> ablate(const Corpus& corpus, const IntentionDictionary& dict,
                                const RainConfig& model_config, const TrainConfig& train_config) {
  const auto variants = ablation_variants();
  std::vector<std::function<std::pair<double, double>()>> jobs;
  for (const auto& v : variants) {
    jobs.emplace_back([&, v] {
      return train_variant(corpus, dict, model_config, train_config, v.flags, v.reports_intention);
    });
  }
  auto scores = run_parallel(std::move(jobs), train_config.threads);

  std::vector<AblationRow> rows;
  const auto [base_m, base_e] = scores.front();
  for (std::size_t i = 0; i < variants.size(); ++i) {
    AblationRow row;
    row.name = variants[i].name;
    if (variants[i].reports_intention) {
      row.intention_f1 = scores[i].first;
      row.intention_delta = scores[i].first - base_m;
    }
    row.emotion_f1 = scores[i].second;
    row.emotion_delta = scores[i].second - base_e;
    rows.push_back(row);
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "variant,intention_f1,intention_delta,emotion_f1,emotion_delta\n";
  char buf[64];
  for (const auto& r : rows) {
    out << r.name << ',';
    if (r.intention_f1) {
      std::snprintf(buf, sizeof buf, "%.2f,%+.2f", 100.0 * *r.intention_f1, 100.0 * *r.intention_delta);
      out << buf;
    } else {
      out << "-,-";
    }
    std::snprintf(buf, sizeof buf, ",%.2f,%+.2f\n", 100.0 * r.emotion_f1, 100.0 * r.emotion_delta);
    out << buf;
  }
  return out.str();
}

}  // namespace rain
