#include "rain/metrics.hpp"

#include "rain/errors.hpp"

namespace rain {

using nlohmann::ordered_json;

TaskMetrics metrics_from_confusion(const std::vector<std::vector<std::size_t>>& confusion,
                                   std::vector<std::string> labels) {
  const std::size_t n = labels.size();
  if (confusion.size() != n) throw DimensionError("confusion matrix does not match the label count");
  for (const auto& row : confusion) {
    if (row.size() != n) throw DimensionError("confusion matrix is not square");
  }

  TaskMetrics m;
  m.labels = std::move(labels);
  m.confusion = confusion;
  m.per_class.resize(n);
  std::size_t correct = 0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t support = 0, predicted = 0;
    for (std::size_t k = 0; k < n; ++k) {
      support += confusion[c][k];
      predicted += confusion[k][c];
    }
    const std::size_t tp = confusion[c][c];
    correct += tp;
    m.total += support;
    auto& cm = m.per_class[c];
    cm.support = support;
    cm.predicted = predicted;
    cm.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    cm.recall = support ? static_cast<double>(tp) / static_cast<double>(support) : 0.0;
    const double pr = cm.precision + cm.recall;
    cm.f1 = pr > 0.0 ? 2.0 * cm.precision * cm.recall / pr : 0.0;
  }

  std::size_t supported = 0;
  for (const auto& cm : m.per_class) {
    if (cm.support == 0) continue;
    ++supported;
    m.macro_precision += cm.precision;
    m.macro_recall += cm.recall;
    m.macro_f1 += cm.f1;
  }
  if (supported > 0) {
    m.macro_precision /= static_cast<double>(supported);
    m.macro_recall /= static_cast<double>(supported);
    m.macro_f1 /= static_cast<double>(supported);
  }
  m.accuracy = m.total ? static_cast<double>(correct) / static_cast<double>(m.total) : 0.0;
  return m;
}

TaskMetrics compute_metrics(std::span<const std::size_t> gold, std::span<const std::size_t> predicted,
                            std::vector<std::string> labels) {
  if (gold.empty()) throw DataError("cannot compute metrics on an empty split");
  if (gold.size() != predicted.size()) throw DimensionError("gold and predicted lengths differ");
  const std::size_t n = labels.size();
  std::vector<std::vector<std::size_t>> confusion(n, std::vector<std::size_t>(n, 0));
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] >= n || predicted[i] >= n) throw DimensionError("label index out of range");
    confusion[gold[i]][predicted[i]] += 1;
  }
  return metrics_from_confusion(confusion, std::move(labels));
}

ordered_json to_json(const TaskMetrics& m) {
  ordered_json node;
  node["macro_precision"] = m.macro_precision;
  node["macro_recall"] = m.macro_recall;
  node["macro_f1"] = m.macro_f1;
  node["accuracy"] = m.accuracy;
  node["total"] = m.total;
  node["per_class"] = ordered_json::object();
  for (std::size_t c = 0; c < m.labels.size(); ++c) {
    const auto& cm = m.per_class[c];
    node["per_class"][m.labels[c]] = {{"precision", cm.precision}, {"recall", cm.recall}, {"f1", cm.f1},
                                      {"support", cm.support},     {"predicted", cm.predicted}};
  }
  node["labels"] = m.labels;
  node["confusion"] = m.confusion;
  return node;
}

ordered_json to_json(const MetricsReport& report) {
  ordered_json node;
  node["intention"] = to_json(report.intention);
  node["emotion"] = to_json(report.emotion);
  node["history"] = ordered_json::array();
  for (const auto& e : report.history) {
    node["history"].push_back({{"epoch", e.epoch},
                               {"train_loss", e.train_loss},
                               {"dev_intention_f1", e.dev_intention_f1},
                               {"dev_emotion_f1", e.dev_emotion_f1}});
  }
  return node;
}

}  // namespace rain
