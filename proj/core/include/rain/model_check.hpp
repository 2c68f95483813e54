#pragma once

#include <cstdint>
#include <vector>

#include "rain/diff/gradcheck.hpp"
#include "rain/model.hpp"

namespace rain {

struct RandomDialogueSpec {
  std::size_t dialogues = 2;
  std::size_t utterances = 3;
  std::size_t vocab_size = 50;
  std::size_t max_tokens = 5;
  std::uint64_t seed = 0;
};

// Labeled dialogues with random tokens, alternating speakers and random
// dictionary priors (every other utterance has a zero prior).
std::vector<PreparedDialogue> random_dialogues(const RandomDialogueSpec& spec);

// Finite-difference check of the full training objective (one batch holding
// all `dialogues`) in double precision.
diff::GradCheckResult check_model_gradients(const RainConfig& config, const std::vector<PreparedDialogue>& dialogues,
                                            const diff::GradCheckOptions& options = {});

// Same check with x87 extended precision, which keeps finite-difference
// round-off well below 1e-8 gradients.
diff::GradCheckResult check_model_gradients_extended(const RainConfig& config,
                                                     const std::vector<PreparedDialogue>& dialogues,
                                                     const diff::GradCheckOptions& options = {});

}  // namespace rain
