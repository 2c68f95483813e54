#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rain/corpus.hpp"

namespace rain {

// Turns considered when looking back for an open request/suggest/command.
inline constexpr std::size_t kEmotionRuleWindow = 3;

struct TurnSketch {
  std::string speaker;
  Intention intention;
};

// The generative emotion rule. For turn t by speaker S: take the most recent
// directive by S among the previous `window` turns; the first later turn by
// another speaker that is accept/inform/reject decides the emotion:
//   accept -> happy, inform -> content,
//   reject -> disgust (suggest) / sadness (request, command).
// Anything else is neutral.
std::vector<Emotion> apply_emotion_rule(const std::vector<TurnSketch>& turns,
                                        std::size_t window = kEmotionRuleWindow);

// Requires gold intentions on every utterance.
std::vector<Emotion> apply_emotion_rule(const Dialogue& dialogue,
                                        std::size_t window = kEmotionRuleWindow);

// Keyword phrases that mark each intention in generated text.
const std::vector<std::string>& synthetic_phrases(Intention label);

struct SyntheticOptions {
  std::size_t n_train = 500;
  std::size_t n_dev = 100;
  std::size_t n_test = 100;
  std::size_t min_turns = 4;
  std::size_t max_turns = 10;
};

// Pure function of (seed, options). Speakers alternate A/B so that the
// speaker of every turn is recoverable from position.
Corpus gen_synthetic(std::uint64_t seed, const SyntheticOptions& options);

// Splits n_dialogues 70/15/15 (train gets the remainder, at least 1).
Corpus gen_synthetic(std::uint64_t seed, std::size_t n_dialogues);

}  // namespace rain
