#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rain/checkpoint.hpp"
#include "rain/corpus.hpp"
#include "rain/diff/params.hpp"
#include "rain/intent_dict.hpp"
#include "rain/metrics.hpp"
#include "rain/model.hpp"

namespace rain {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  double learning_rate = 3e-3;
  std::size_t batch_size = 16;
  std::size_t epochs = 8;
  std::uint64_t seed = 7;
  // Grid search: every (lr, batch) pair is trained for max(grid_epochs)
  // epochs and the best dev epoch in [min, max] is kept.
  std::vector<double> grid_learning_rates = {1e-3, 3e-3};
  std::vector<std::size_t> grid_batch_sizes = {16, 32};
  std::vector<std::size_t> grid_epochs = {3, 12};
  AdamConfig adam;
  // Replicas trained concurrently by grid search and ablation.
  std::size_t threads = 1;

  // Throws ConfigError.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
void apply_train_config_json(TrainConfig& config, const nlohmann::json& node);

template <class T>
class Adam {
 public:
  Adam(diff::ParameterStore<T>& store, double learning_rate, AdamConfig config = {})
      : store_(store), lr_(learning_rate), config_(config) {
    for (std::size_t i = 0; i < store.size(); ++i) {
      m_.emplace_back(store[i].size(), T(0));
      v_.emplace_back(store[i].size(), T(0));
    }
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    const T b1 = static_cast<T>(config_.beta1), b2 = static_cast<T>(config_.beta2);
    const T step_size = static_cast<T>(lr_ / c1);
    const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(c2));
    const T eps = static_cast<T>(config_.eps);
    for (std::size_t i = 0; i < store_.size(); ++i) {
      auto& p = store_[i];
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t k = 0; k < p.size(); ++k) {
        const T g = p.grad[k];
        m[k] = b1 * m[k] + (T(1) - b1) * g;
        v[k] = b2 * v[k] + (T(1) - b2) * g * g;
        p.value[k] -= step_size * m[k] / (std::sqrt(v[k]) * inv_sqrt_c2 + eps);
      }
    }
  }

  std::size_t steps() const { return t_; }

 private:
  diff::ParameterStore<T>& store_;
  double lr_;
  AdamConfig config_;
  std::vector<std::vector<T>> m_, v_;
  std::size_t t_ = 0;
};

struct TrainResult {
  std::unique_ptr<RainModel<float>> model;  // parameters from the best dev epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_score = 0.0;
};

struct TrainOptions {
  // Epochs before this one are not eligible for model selection.
  std::size_t select_from_epoch = 1;
  std::function<void(const EpochRecord&)> on_epoch;
};

// Score used to pick the best epoch: mean macro-F1 of both tasks, or the
// trained task's F1 for single-task models.
double selection_score(const MetricsReport& report, const RainConfig& config);

// Fills model.vocab_size from the corpus when it is 0.
RainConfig resolve_config(RainConfig config, const Corpus& corpus);

TrainResult train(const Corpus& corpus, const IntentionDictionary& dict, const RainConfig& model_config,
                  const TrainConfig& train_config, const TrainOptions& options = {});

MetricsReport evaluate(const RainModel<float>& model, const std::vector<PreparedDialogue>& dialogues);
MetricsReport evaluate(const RainModel<float>& model, const Corpus& corpus, Split split,
                       const IntentionDictionary& dict);

// Mean over dialogues of the per-dialogue objective (sum over utterances).
double dataset_loss(const RainModel<float>& model, const std::vector<PreparedDialogue>& dialogues);

std::string epoch_csv(const std::vector<EpochRecord>& history);
void write_epoch_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path);

struct GridTrial {
  double learning_rate = 0.0;
  std::size_t batch_size = 0;
  std::size_t best_epoch = 0;
  double dev_score = 0.0;
};

struct GridResult {
  std::vector<GridTrial> trials;
  std::size_t best = 0;
  TrainResult best_result;
};

GridResult grid_search(const Corpus& corpus, const IntentionDictionary& dict, const RainConfig& model_config,
                       const TrainConfig& train_config);

struct AblationVariant {
  std::string name;
  AblationFlags flags;
  bool reports_intention = true;
};

// base, +dictionary, +fusion, +history, +multi-task, full.
std::vector<AblationVariant> ablation_variants();

struct AblationRow {
  std::string name;
  std::optional<double> intention_f1;  // empty when the variant cannot change the intention branch
  double emotion_f1 = 0.0;
  std::optional<double> intention_delta;
  double emotion_delta = 0.0;
};

// Trains every variant from the same seeds and reports test-split macro F1
// (dev when test is empty). Variants without multi-task are trained as two
// single-task models.
std::vector<AblationRow> ablate(const Corpus& corpus, const IntentionDictionary& dict,
                                const RainConfig& model_config, const TrainConfig& train_config);

// Trains one flag combination the way ablate() does and returns (intention F1, emotion F1).
std::pair<double, double> train_variant(const Corpus& corpus, const IntentionDictionary& dict,
                                        const RainConfig& model_config, const TrainConfig& train_config,
                                        const AblationFlags& flags, bool need_intention = true);

std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace rain
