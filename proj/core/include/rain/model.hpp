#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rain/corpus.hpp"
#include "rain/diff/cells.hpp"
#include "rain/diff/params.hpp"
#include "rain/diff/tape.hpp"
#include "rain/encoders.hpp"
#include "rain/intent_dict.hpp"
#include "rain/labels.hpp"

namespace rain {

// rain: the full intention/emotion relation network.
// baseline: one encoder feeding two independent affine heads (no dictionary,
// history or fusion).
enum class Architecture { rain, baseline };
enum class SingleTask { intention, emotion };

std::string_view to_string(Architecture a);
std::string_view to_string(SingleTask t);

struct AblationFlags {
  bool use_dict = true;
  bool use_history = true;
  bool use_fusion = true;
  bool multi_task = true;

  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

struct RainConfig {
  Architecture architecture = Architecture::rain;
  std::size_t hidden = 32;
  std::size_t embed_dim = 32;
  std::size_t vocab_size = 0;
  EncoderKind intention_encoder = EncoderKind::gru;
  EncoderKind emotion_encoder = EncoderKind::gru;
  double lambda1 = 0.5;
  double lambda2 = 0.5;
  AblationFlags flags;
  // Objective when flags.multi_task is false.
  SingleTask single_task = SingleTask::intention;
  std::uint64_t init_seed = 1;

  // Throws ConfigError.
  void validate() const;

  EncoderConfig encoder_config(EncoderKind kind) const {
    return {kind, embed_dim, hidden, vocab_size};
  }
};

// Strict: unknown keys raise ConfigError. Missing keys keep their defaults.
nlohmann::json to_json(const RainConfig& config);
RainConfig rain_config_from_json(const nlohmann::json& node);
void apply_rain_config_json(RainConfig& config, const nlohmann::json& node);

// Everything the model needs from one dialogue, computed once per corpus.
struct PreparedUtterance {
  std::string speaker;
  std::vector<TokenId> tokens;
  IntentionDistribution prior{};
  std::optional<Intention> intention;
  std::optional<Emotion> emotion;
};

struct PreparedDialogue {
  std::string id;
  std::vector<PreparedUtterance> utterances;
};

// The dictionary prior is looked up on the utterance's words. A null
// dictionary yields all-zero priors.
PreparedDialogue prepare(const Dialogue& dialogue, const IntentionDictionary* dict);
std::vector<PreparedDialogue> prepare(const std::vector<const Dialogue*>& dialogues,
                                      const IntentionDictionary* dict);

template <class T>
struct TurnNodes {
  diff::Var<T> s;        // intention-side sentence vector
  diff::Var<T> g;        // emotion-side sentence vector
  diff::Var<T> p;        // dictionary prior (constant)
  diff::Var<T> s_tilde;  // intention vector
  diff::Var<T> h;        // intention history
  diff::Var<T> f;        // fused intention representation
  diff::Var<T> g_tilde;  // emotion vector
  diff::Var<T> logits_m;
  diff::Var<T> logits_e;
};

template <class T>
struct TurnActivations {
  std::vector<T> s, g, p, s_tilde, h, f, g_tilde;
  std::vector<T> y_m;  // intention distribution (7)
  std::vector<T> y_e;  // emotion distribution (6)
};

// LSTM state for one dialogue on one tape. Each state value may be advanced
// exactly once; reusing an older copy or a state from another tape throws.
template <class T>
struct DialogueState {
  diff::LstmState<T> lstm;
  const diff::Tape<T>* tape = nullptr;
  std::shared_ptr<std::size_t> latest;
  std::size_t step = 0;
};

template <class T>
struct LossResult {
  diff::Var<T> total;  // contribution of this dialogue, already divided by K
  T l_m = T(0);        // sum over utterances of intention cross-entropy
  T l_e = T(0);
};

// lambda1 * l_m + lambda2 * l_e, or the single-task term when multi_task is off.
double joint_loss(double l_m, double l_e, const RainConfig& config);

template <class T>
class RainModel {
 public:
  explicit RainModel(const RainConfig& config);

  RainModel(const RainModel&) = delete;
  RainModel& operator=(const RainModel&) = delete;

  const RainConfig& config() const { return config_; }
  diff::ParameterStore<T>& params() { return store_; }
  const diff::ParameterStore<T>& params() const { return store_; }
  const Encoder<T>& intention_encoder() const { return *enc_intention_; }
  const Encoder<T>* emotion_encoder() const { return enc_emotion_.get(); }

  // s~ = MLP(ReLU(W_s^T s + p)); MLP = affine(l_s->h), ReLU, affine(h->h).
  diff::Var<T> intention_forward(diff::Var<T> s, diff::Var<T> p) const;

  DialogueState<T> begin_dialogue(diff::Tape<T>& tape) const;
  // One LSTM step over s~; returns h_i and replaces `state` with the advanced state.
  diff::Var<T> history_step(diff::Var<T> s_tilde, DialogueState<T>& state) const;

  // [s~; h; s~*h; s~-h], the pre-affine input of the fusion kernel.
  diff::Var<T> fusion_input(diff::Var<T> s_tilde, diff::Var<T> h) const;
  // tanh(W_f^T [s~; h; s~*h; s~-h] + b_f)
  diff::Var<T> fuse(diff::Var<T> s_tilde, diff::Var<T> h) const;
  // ReLU(W_g^T [f; g] + b_g)
  diff::Var<T> emotion_forward(diff::Var<T> f, diff::Var<T> g) const;

  struct HeadLogits {
    diff::Var<T> intention;
    diff::Var<T> emotion;
  };
  HeadLogits heads(diff::Var<T> s_tilde, diff::Var<T> g_tilde) const;

  // Records the whole dialogue on `tape`, utterances in order.
  std::vector<TurnNodes<T>> forward(diff::Tape<T>& tape, const PreparedDialogue& dialogue) const;

  // Forward pass only; returns values with softmax distributions.
  std::vector<TurnActivations<T>> dialogue_forward(const PreparedDialogue& dialogue) const;

  // Requires gold labels for the task(s) being optimized.
  LossResult<T> loss(diff::Tape<T>& tape, const std::vector<TurnNodes<T>>& turns,
                     const PreparedDialogue& dialogue, std::size_t batch_dialogues) const;

 private:
  RainConfig config_;
  diff::ParameterStore<T> store_;
  std::unique_ptr<Encoder<T>> enc_intention_;
  std::unique_ptr<Encoder<T>> enc_emotion_;
  diff::ParamTensor<T>* w_s_ = nullptr;
  diff::ParamTensor<T>* mlp1_w_ = nullptr;
  diff::ParamTensor<T>* mlp1_b_ = nullptr;
  diff::ParamTensor<T>* mlp2_w_ = nullptr;
  diff::ParamTensor<T>* mlp2_b_ = nullptr;
  diff::LstmParams<T> lstm_;
  diff::ParamTensor<T>* w_f_ = nullptr;
  diff::ParamTensor<T>* b_f_ = nullptr;
  diff::ParamTensor<T>* w_g_ = nullptr;
  diff::ParamTensor<T>* b_g_ = nullptr;
  diff::ParamTensor<T>* w_m_ = nullptr;
  diff::ParamTensor<T>* b_m_ = nullptr;
  diff::ParamTensor<T>* w_e_ = nullptr;
  diff::ParamTensor<T>* b_e_ = nullptr;
};

extern template class RainModel<float>;
extern template class RainModel<double>;
extern template class RainModel<long double>;

}  // namespace rain
