#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace rain {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;    // gold count
  std::size_t predicted = 0;  // predicted count
};

// Confusion rows are gold labels, columns predictions. Macro averages run
// over classes with nonzero gold support only.
struct TaskMetrics {
  std::vector<std::string> labels;
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<ClassMetrics> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  std::size_t total = 0;
};

TaskMetrics metrics_from_confusion(const std::vector<std::vector<std::size_t>>& confusion,
                                   std::vector<std::string> labels);

// Throws DataError on empty input and DimensionError on mismatched lengths or
// out-of-range labels.
TaskMetrics compute_metrics(std::span<const std::size_t> gold, std::span<const std::size_t> predicted,
                            std::vector<std::string> labels);

template <std::size_t N>
std::vector<std::string> label_names(const std::array<std::string_view, N>& names) {
  return {names.begin(), names.end()};
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_intention_f1 = 0.0;
  double dev_emotion_f1 = 0.0;
};

struct MetricsReport {
  TaskMetrics intention;
  TaskMetrics emotion;
  std::vector<EpochRecord> history;

  // Mean of the two tasks' macro F1; the model-selection score.
  double mean_f1() const { return 0.5 * (intention.macro_f1 + emotion.macro_f1); }
};

nlohmann::ordered_json to_json(const TaskMetrics& m);
nlohmann::ordered_json to_json(const MetricsReport& report);

}  // namespace rain
