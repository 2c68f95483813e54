#include "rain/explain.hpp"

#include <algorithm>

#include "rain/errors.hpp"

namespace rain {

std::string_view to_string(IntentionStatus status) {
  switch (status) {
    case IntentionStatus::satisfied: return "satisfied";
    case IntentionStatus::not_yet_satisfied: return "not yet satisfied";
    case IntentionStatus::none_pending: return "none pending";
  }
  return "?";
}

std::vector<IntentionStatus> intention_status(const std::vector<TurnPrediction>& turns) {
  std::vector<IntentionStatus> out(turns.size(), IntentionStatus::none_pending);
  for (std::size_t t = 0; t < turns.size(); ++t) {
    std::size_t open = t;
    for (std::size_t j = t; j-- > 0;) {
      if (turns[j].speaker == turns[t].speaker && is_directive(turns[j].intention)) {
        open = j;
        break;
      }
    }
    if (open == t) continue;
    out[t] = IntentionStatus::not_yet_satisfied;
    for (std::size_t k = open + 1; k < t; ++k) {
      if (turns[k].speaker != turns[t].speaker &&
          (turns[k].intention == Intention::accept || turns[k].intention == Intention::inform)) {
        out[t] = IntentionStatus::satisfied;
        break;
      }
    }
  }
  return out;
}

std::vector<std::string> explain(const std::vector<TurnPrediction>& turns) {
  auto status = intention_status(turns);
  std::vector<std::string> lines;
  lines.reserve(turns.size());
  for (std::size_t t = 0; t < turns.size(); ++t) {
    lines.push_back("Emotion of " + turns[t].speaker + " is " + std::string(to_string(turns[t].emotion)) +
                    " because his intention is " + std::string(to_string(status[t])));
  }
  return lines;
}

std::vector<TurnPrediction> predictions(const PreparedDialogue& dialogue,
                                        const std::vector<TurnActivations<float>>& activations) {
  if (activations.size() != dialogue.utterances.size()) {
    throw DimensionError("explain: activations do not match the dialogue length");
  }
  std::vector<TurnPrediction> out;
  out.reserve(activations.size());
  for (std::size_t i = 0; i < activations.size(); ++i) {
    const auto& a = activations[i];
    auto im = std::max_element(a.y_m.begin(), a.y_m.end()) - a.y_m.begin();
    auto ie = std::max_element(a.y_e.begin(), a.y_e.end()) - a.y_e.begin();
    out.push_back({dialogue.utterances[i].speaker, static_cast<Intention>(im), static_cast<Emotion>(ie)});
  }
  return out;
}

std::vector<std::string> explain(const PreparedDialogue& dialogue,
                                 const std::vector<TurnActivations<float>>& activations) {
  return explain(predictions(dialogue, activations));
}

}  // namespace rain
