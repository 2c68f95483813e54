#pragma once

#include <string>
#include <vector>

#include "rain/labels.hpp"
#include "rain/model.hpp"

namespace rain {

struct TurnPrediction {
  std::string speaker;
  Intention intention;
  Emotion emotion;
};

enum class IntentionStatus { satisfied, not_yet_satisfied, none_pending };

std::string_view to_string(IntentionStatus status);

// Status of the speaker's most recent earlier request/suggest/command:
// satisfied once another speaker has answered it with accept or inform,
// not yet satisfied while unanswered, none pending when there is none.
std::vector<IntentionStatus> intention_status(const std::vector<TurnPrediction>& turns);

// One line per turn:
//   "Emotion of <speaker> is <emotion> because his intention is <status>"
std::vector<std::string> explain(const std::vector<TurnPrediction>& turns);

// Uses the argmax of each head as the prediction.
std::vector<TurnPrediction> predictions(const PreparedDialogue& dialogue,
                                        const std::vector<TurnActivations<float>>& activations);
std::vector<std::string> explain(const PreparedDialogue& dialogue,
                                 const std::vector<TurnActivations<float>>& activations);

}  // namespace rain
