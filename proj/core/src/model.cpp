#include "rain/model.hpp"

#include <cmath>

#include "rain/errors.hpp"

namespace rain {

using nlohmann::json;

std::string_view to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::meanpool: return "meanpool";
    case EncoderKind::gru: return "gru";
    case EncoderKind::gru_attn: return "gru_attn";
  }
  return "?";
}

EncoderKind parse_encoder_kind(std::string_view name) {
  if (name == "meanpool") return EncoderKind::meanpool;
  if (name == "gru") return EncoderKind::gru;
  if (name == "gru_attn") return EncoderKind::gru_attn;
  throw ConfigError("unknown encoder kind '" + std::string(name) + "'");
}

std::string_view to_string(Architecture a) { return a == Architecture::rain ? "rain" : "baseline"; }
std::string_view to_string(SingleTask t) { return t == SingleTask::intention ? "intention" : "emotion"; }

void RainConfig::validate() const {
  if (hidden == 0) throw ConfigError("model.hidden must be >= 1");
  if (embed_dim == 0) throw ConfigError("model.embed_dim must be >= 1");
  if (vocab_size < 2) throw ConfigError("model.vocab_size must cover the reserved ids (>= 2)");
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0) || !std::isfinite(lambda1) || !std::isfinite(lambda2)) {
    throw ConfigError("model.lambda1 and model.lambda2 must be finite and >= 0");
  }
  if (flags.multi_task && lambda1 + lambda2 <= 0.0) {
    throw ConfigError("multi-task training needs lambda1 + lambda2 > 0");
  }
}

json to_json(const RainConfig& c) {
  json node;
  node["architecture"] = std::string(to_string(c.architecture));
  node["hidden"] = c.hidden;
  node["embed_dim"] = c.embed_dim;
  node["vocab_size"] = c.vocab_size;
  node["intention_encoder"] = std::string(to_string(c.intention_encoder));
  node["emotion_encoder"] = std::string(to_string(c.emotion_encoder));
  node["lambda1"] = c.lambda1;
  node["lambda2"] = c.lambda2;
  node["use_dict"] = c.flags.use_dict;
  node["use_history"] = c.flags.use_history;
  node["use_fusion"] = c.flags.use_fusion;
  node["multi_task"] = c.flags.multi_task;
  node["single_task"] = std::string(to_string(c.single_task));
  node["init_seed"] = c.init_seed;
  node["intention_labels"] = json::array();
  for (auto n : kIntentionNames) node["intention_labels"].push_back(std::string(n));
  node["emotion_labels"] = json::array();
  for (auto n : kEmotionNames) node["emotion_labels"].push_back(std::string(n));
  return node;
}

namespace {

template <class V>
V typed(const json& value, const std::string& key) {
  try {
    return value.get<V>();
  } catch (const json::exception&) {
    throw ConfigError("model." + key + " has the wrong type");
  }
}

std::size_t positive_size(const json& value, const std::string& key) {
  if (!value.is_number_integer() || value.get<std::int64_t>() < 0) {
    throw ConfigError("model." + key + " must be a non-negative integer");
  }
  return value.get<std::size_t>();
}

template <std::size_t N>
void check_labels(const json& value, const std::array<std::string_view, N>& expected) {
  if (!value.is_array()) throw ConfigError("label list must be an array");
  for (std::size_t i = 0; i < value.size(); ++i) {
    const auto name = value[i].is_string() ? value[i].get<std::string>() : value[i].dump();
    if (i >= N || name != expected[i]) throw LabelError(name);
  }
  if (value.size() != N) throw LabelError("<missing label #" + std::to_string(value.size()) + ">");
}

}  // namespace

void apply_rain_config_json(RainConfig& c, const json& node) {
  if (!node.is_object()) throw ConfigError("model section must be an object");
  for (const auto& [key, value] : node.items()) {
    if (key == "architecture") {
      const auto name = typed<std::string>(value, key);
      if (name == "rain") c.architecture = Architecture::rain;
      else if (name == "baseline") c.architecture = Architecture::baseline;
      else throw ConfigError("unknown architecture '" + name + "'");
    } else if (key == "hidden") {
      c.hidden = positive_size(value, key);
    } else if (key == "embed_dim") {
      c.embed_dim = positive_size(value, key);
    } else if (key == "vocab_size") {
      c.vocab_size = positive_size(value, key);
    } else if (key == "intention_encoder") {
      c.intention_encoder = parse_encoder_kind(typed<std::string>(value, key));
    } else if (key == "emotion_encoder") {
      c.emotion_encoder = parse_encoder_kind(typed<std::string>(value, key));
    } else if (key == "lambda1") {
      c.lambda1 = typed<double>(value, key);
    } else if (key == "lambda2") {
      c.lambda2 = typed<double>(value, key);
    } else if (key == "use_dict") {
      c.flags.use_dict = typed<bool>(value, key);
    } else if (key == "use_history") {
      c.flags.use_history = typed<bool>(value, key);
    } else if (key == "use_fusion") {
      c.flags.use_fusion = typed<bool>(value, key);
    } else if (key == "multi_task") {
      c.flags.multi_task = typed<bool>(value, key);
    } else if (key == "single_task") {
      const auto name = typed<std::string>(value, key);
      if (name == "intention") c.single_task = SingleTask::intention;
      else if (name == "emotion") c.single_task = SingleTask::emotion;
      else throw ConfigError("unknown single_task '" + name + "'");
    } else if (key == "init_seed") {
      c.init_seed = typed<std::uint64_t>(value, key);
    } else if (key == "intention_labels") {
      check_labels(value, kIntentionNames);
    } else if (key == "emotion_labels") {
      check_labels(value, kEmotionNames);
    } else {
      throw ConfigError("unknown model key '" + key + "'");
    }
  }
}

RainConfig rain_config_from_json(const json& node) {
  RainConfig c;
  apply_rain_config_json(c, node);
  return c;
}

double joint_loss(double l_m, double l_e, const RainConfig& config) {
  if (!config.flags.multi_task) return config.single_task == SingleTask::intention ? l_m : l_e;
  return config.lambda1 * l_m + config.lambda2 * l_e;
}

PreparedDialogue prepare(const Dialogue& dialogue, const IntentionDictionary* dict) {
  PreparedDialogue out;
  out.id = dialogue.id;
  out.utterances.reserve(dialogue.utterances.size());
  for (const auto& u : dialogue.utterances) {
    PreparedUtterance pu;
    pu.speaker = u.speaker;
    pu.tokens = u.tokens;
    if (dict) pu.prior = dict->lookup(u.words);
    pu.intention = u.intention;
    pu.emotion = u.emotion;
    out.utterances.push_back(std::move(pu));
  }
  return out;
}

std::vector<PreparedDialogue> prepare(const std::vector<const Dialogue*>& dialogues,
                                      const IntentionDictionary* dict) {
  std::vector<PreparedDialogue> out;
  out.reserve(dialogues.size());
  for (const auto* d : dialogues) out.push_back(prepare(*d, dict));
  return out;
}

template <class T>
RainModel<T>::RainModel(const RainConfig& config) : config_(config), store_(config.init_seed) {
  config_.validate();
  using diff::Init;
  const std::size_t h = config_.hidden;
  enc_intention_ = std::make_unique<Encoder<T>>(store_, "enc_intention", config_.encoder_config(config_.intention_encoder));
  if (config_.architecture == Architecture::rain) {
    enc_emotion_ = std::make_unique<Encoder<T>>(store_, "enc_emotion", config_.encoder_config(config_.emotion_encoder));
    w_s_ = &store_.add("intent.W_s", h, kNumIntentions, Init::xavier_uniform);
    mlp1_w_ = &store_.add("intent.mlp1.W", kNumIntentions, h, Init::xavier_uniform);
    mlp1_b_ = &store_.add("intent.mlp1.b", 1, h, Init::zeros);
    mlp2_w_ = &store_.add("intent.mlp2.W", h, h, Init::xavier_uniform);
    mlp2_b_ = &store_.add("intent.mlp2.b", 1, h, Init::zeros);
    lstm_ = diff::LstmParams<T>::create(store_, "history.lstm", h, h);
    w_f_ = &store_.add("fusion.W_f", 4 * h, h, Init::xavier_uniform);
    b_f_ = &store_.add("fusion.b_f", 1, h, Init::zeros);
    w_g_ = &store_.add("emotion.W_g", 2 * h, h, Init::xavier_uniform);
    b_g_ = &store_.add("emotion.b_g", 1, h, Init::zeros);
  }
  w_m_ = &store_.add("head_m.W", h, kNumIntentions, Init::xavier_uniform);
  b_m_ = &store_.add("head_m.b", 1, kNumIntentions, Init::zeros);
  w_e_ = &store_.add("head_e.W", h, kNumEmotions, Init::xavier_uniform);
  b_e_ = &store_.add("head_e.b", 1, kNumEmotions, Init::zeros);
}

namespace {

template <class T>
void require_size(const char* op, const char* what, diff::Var<T> v, std::size_t expected) {
  if (v.size() != expected) {
    throw DimensionError(std::string(op) + ": " + what + " has " + std::to_string(v.size()) + " entries, expected " +
                         std::to_string(expected));
  }
}

}  // namespace

template <class T>
diff::Var<T> RainModel<T>::intention_forward(diff::Var<T> s, diff::Var<T> p) const {
  if (!w_s_) throw Error("intention_forward: baseline architecture has no intention relation module");
  require_size("intention_forward", "s", s, config_.hidden);
  require_size("intention_forward", "p", p, kNumIntentions);
  auto& tape = *s.tape;
  auto z = diff::relu(diff::add(diff::linear(s, tape.param(*w_s_)), p));
  auto hidden = diff::relu(diff::affine(z, tape.param(*mlp1_w_), tape.param(*mlp1_b_)));
  return diff::affine(hidden, tape.param(*mlp2_w_), tape.param(*mlp2_b_));
}

template <class T>
DialogueState<T> RainModel<T>::begin_dialogue(diff::Tape<T>& tape) const {
  DialogueState<T> state;
  state.lstm = diff::lstm_zero_state(tape, config_.hidden);
  state.tape = &tape;
  state.latest = std::make_shared<std::size_t>(0);
  return state;
}

template <class T>
diff::Var<T> RainModel<T>::history_step(diff::Var<T> s_tilde, DialogueState<T>& state) const {
  if (!w_s_) throw Error("history_step: baseline architecture has no history module");
  if (state.tape != s_tilde.tape || !state.latest) throw Error("history_step: state belongs to another dialogue");
  if (*state.latest != state.step) throw Error("history_step: stale dialogue state");
  state.lstm = diff::lstm_cell(s_tilde, state.lstm, lstm_);
  state.step += 1;
  *state.latest = state.step;
  return state.lstm.h;
}

template <class T>
diff::Var<T> RainModel<T>::fusion_input(diff::Var<T> s_tilde, diff::Var<T> h) const {
  require_size("fuse", "s~", s_tilde, config_.hidden);
  require_size("fuse", "h", h, config_.hidden);
  return diff::concat({s_tilde, h, diff::mul(s_tilde, h), diff::sub(s_tilde, h)});
}

template <class T>
diff::Var<T> RainModel<T>::fuse(diff::Var<T> s_tilde, diff::Var<T> h) const {
  if (!w_f_) throw Error("fuse: baseline architecture has no fusion module");
  auto& tape = *s_tilde.tape;
  return diff::tanh(diff::affine(fusion_input(s_tilde, h), tape.param(*w_f_), tape.param(*b_f_)));
}

template <class T>
diff::Var<T> RainModel<T>::emotion_forward(diff::Var<T> f, diff::Var<T> g) const {
  if (!w_g_) throw Error("emotion_forward: baseline architecture has no emotion relation module");
  require_size("emotion_forward", "f", f, config_.hidden);
  require_size("emotion_forward", "g", g, config_.hidden);
  auto& tape = *f.tape;
  return diff::relu(diff::affine(diff::concat({f, g}), tape.param(*w_g_), tape.param(*b_g_)));
}

template <class T>
typename RainModel<T>::HeadLogits RainModel<T>::heads(diff::Var<T> s_tilde, diff::Var<T> g_tilde) const {
  require_size("heads", "s~", s_tilde, config_.hidden);
  require_size("heads", "g~", g_tilde, config_.hidden);
  auto& tape = *s_tilde.tape;
  return {diff::affine(s_tilde, tape.param(*w_m_), tape.param(*b_m_)),
          diff::affine(g_tilde, tape.param(*w_e_), tape.param(*b_e_))};
}

template <class T>
std::vector<TurnNodes<T>> RainModel<T>::forward(diff::Tape<T>& tape, const PreparedDialogue& dialogue) const {
  std::vector<TurnNodes<T>> turns;
  turns.reserve(dialogue.utterances.size());
  const std::size_t h = config_.hidden;

  if (config_.architecture == Architecture::baseline) {
    for (const auto& u : dialogue.utterances) {
      TurnNodes<T> n;
      n.s = enc_intention_->encode(tape, u.tokens);
      n.g = n.s;
      n.p = tape.zeros(kNumIntentions);
      n.s_tilde = n.s;
      n.h = tape.zeros(h);
      n.f = n.h;
      n.g_tilde = n.s;
      auto logits = heads(n.s, n.s);
      n.logits_m = logits.intention;
      n.logits_e = logits.emotion;
      turns.push_back(n);
    }
    return turns;
  }

  auto state = begin_dialogue(tape);
  for (const auto& u : dialogue.utterances) {
    TurnNodes<T> n;
    n.s = enc_intention_->encode(tape, u.tokens);
    n.g = enc_emotion_->encode(tape, u.tokens);
    std::vector<T> prior(kNumIntentions, T(0));
    if (config_.flags.use_dict) {
      for (std::size_t k = 0; k < kNumIntentions; ++k) prior[k] = static_cast<T>(u.prior[k]);
    }
    n.p = tape.constant(std::move(prior));
    n.s_tilde = intention_forward(n.s, n.p);
    n.h = config_.flags.use_history ? history_step(n.s_tilde, state) : tape.zeros(h);
    n.f = config_.flags.use_fusion ? fuse(n.s_tilde, n.h) : n.s_tilde;
    n.g_tilde = emotion_forward(n.f, n.g);
    auto logits = heads(n.s_tilde, n.g_tilde);
    n.logits_m = logits.intention;
    n.logits_e = logits.emotion;
    turns.push_back(n);
  }
  return turns;
}

template <class T>
std::vector<TurnActivations<T>> RainModel<T>::dialogue_forward(const PreparedDialogue& dialogue) const {
  diff::Tape<T> tape;
  auto turns = forward(tape, dialogue);
  std::vector<TurnActivations<T>> out;
  out.reserve(turns.size());
  auto copy = [](diff::Var<T> v) {
    auto s = v.value();
    return std::vector<T>(s.begin(), s.end());
  };
  for (const auto& n : turns) {
    TurnActivations<T> a;
    a.s = copy(n.s);
    a.g = copy(n.g);
    a.p = copy(n.p);
    a.s_tilde = copy(n.s_tilde);
    a.h = copy(n.h);
    a.f = copy(n.f);
    a.g_tilde = copy(n.g_tilde);
    a.y_m = diff::softmax_values<T>(n.logits_m.value());
    a.y_e = diff::softmax_values<T>(n.logits_e.value());
    out.push_back(std::move(a));
  }
  return out;
}

template <class T>
LossResult<T> RainModel<T>::loss(diff::Tape<T>& tape, const std::vector<TurnNodes<T>>& turns,
                                 const PreparedDialogue& dialogue, std::size_t batch_dialogues) const {
  if (turns.size() != dialogue.utterances.size()) throw DimensionError("loss: turn count mismatch");
  if (batch_dialogues == 0) throw Error("loss: empty batch");
  const bool want_m = config_.flags.multi_task || config_.single_task == SingleTask::intention;
  const bool want_e = config_.flags.multi_task || config_.single_task == SingleTask::emotion;

  LossResult<T> result;
  std::vector<diff::Var<T>> terms_m, terms_e;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const auto& u = dialogue.utterances[i];
    if (want_m && !u.intention) {
      throw DataError("utterance " + std::to_string(i) + " of dialogue '" + dialogue.id + "' lacks a gold intention");
    }
    if (want_e && !u.emotion) {
      throw DataError("utterance " + std::to_string(i) + " of dialogue '" + dialogue.id + "' lacks a gold emotion");
    }
    if (u.intention) {
      auto x = diff::softmax_xent(turns[i].logits_m, index(*u.intention));
      result.l_m += x.loss.scalar();
      if (want_m) terms_m.push_back(x.loss);
    }
    if (u.emotion) {
      auto x = diff::softmax_xent(turns[i].logits_e, index(*u.emotion));
      result.l_e += x.loss.scalar();
      if (want_e) terms_e.push_back(x.loss);
    }
  }
  const T inv_k = T(1) / static_cast<T>(batch_dialogues);
  if (config_.flags.multi_task) {
    auto total = diff::add(diff::scale(diff::sum<T>(terms_m), static_cast<T>(config_.lambda1)),
                           diff::scale(diff::sum<T>(terms_e), static_cast<T>(config_.lambda2)));
    result.total = diff::scale(total, inv_k);
  } else {
    result.total = diff::scale(diff::sum<T>(want_m ? terms_m : terms_e), inv_k);
  }
  (void)tape;
  return result;
}

template class RainModel<float>;
template class RainModel<double>;
template class RainModel<long double>;

}  // namespace rain
