#include "rain/model_check.hpp"

#include <functional>
#include <random>

namespace rain {

std::vector<PreparedDialogue> random_dialogues(const RandomDialogueSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<TokenId> token(2, static_cast<TokenId>(spec.vocab_size) - 1);
  std::uniform_int_distribution<std::size_t> length(1, spec.max_tokens);
  std::uniform_int_distribution<std::size_t> intent(0, kNumIntentions - 1);
  std::uniform_int_distribution<std::size_t> emotion(0, kNumEmotions - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<PreparedDialogue> out;
  for (std::size_t d = 0; d < spec.dialogues; ++d) {
    PreparedDialogue pd;
    pd.id = "rand" + std::to_string(d);
    for (std::size_t i = 0; i < spec.utterances; ++i) {
      PreparedUtterance u;
      u.speaker = i % 2 == 0 ? "A" : "B";
      const std::size_t n = length(rng);
      for (std::size_t t = 0; t < n; ++t) u.tokens.push_back(token(rng));
      if (i % 2 == 0) {
        double total = 0.0;
        for (auto& v : u.prior) total += (v = unit(rng));
        for (auto& v : u.prior) v /= total;
      }
      u.intention = static_cast<Intention>(intent(rng));
      u.emotion = static_cast<Emotion>(emotion(rng));
      pd.utterances.push_back(std::move(u));
    }
    out.push_back(std::move(pd));
  }
  return out;
}

namespace {

template <typename T>
diff::GradCheckResult check_impl(const RainConfig& config, const std::vector<PreparedDialogue>& dialogues,
                                 const diff::GradCheckOptions& options) {
  RainModel<T> model(config);
  std::function<T(bool)> objective = [&](bool backward) {
    T total = 0;
    for (const auto& d : dialogues) {
      diff::Tape<T> tape;
      auto turns = model.forward(tape, d);
      auto l = model.loss(tape, turns, d, dialogues.size());
      total += l.total.scalar();
      if (backward) tape.backward(l.total);
    }
    return total;
  };
  return diff::grad_check<T>(model.params(), objective, options);
}

}  // namespace

diff::GradCheckResult check_model_gradients(const RainConfig& config, const std::vector<PreparedDialogue>& dialogues,
                                            const diff::GradCheckOptions& options) {
  return check_impl<double>(config, dialogues, options);
}

diff::GradCheckResult check_model_gradients_extended(const RainConfig& config,
                                                     const std::vector<PreparedDialogue>& dialogues,
                                                     const diff::GradCheckOptions& options) {
  return check_impl<long double>(config, dialogues, options);
}

}  // namespace rain
