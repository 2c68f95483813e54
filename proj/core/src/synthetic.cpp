#include "rain/synthetic.hpp"

#include <array>
#include <cctype>
#include <cstdio>
#include <random>

#include "rain/errors.hpp"

namespace rain {

namespace {

const std::array<std::vector<std::string>, kNumIntentions> kPhrases = {{
    {"would like", "can i have", "request for"},
    {"how about", "why not", "we could"},
    {"give me", "you must", "bring me"},
    {"sure", "of course", "sounds good"},
    {"no way", "sorry i cannot", "not really"},
    {"do you", "what is", "where is"},
    {"i think", "actually", "i heard"},
}};

const std::vector<std::string> kItems = {
    "a coffee",   "the menu",      "some tea",     "a burger meal", "the red shirt",
    "two tickets", "a taxi",       "the report",   "some water",    "a table",
    "the blue bag", "a receipt",   "the discount", "a cola",        "the bill",
    "a new phone", "the schedule", "some bread",   "a window seat", "the key"};
const std::vector<std::string> kTails = {"", "", "today", "tonight", "right now", "for lunch",
                                         "this weekend", "here", "again", "soon"};
const std::vector<std::string> kOpeners = {"", "", "", "well", "ok", "hmm", "listen", "so"};
const std::vector<std::string> kPunct = {".", "!", "?", ""};

template <class T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& items) {
  std::uniform_int_distribution<std::size_t> d(0, items.size() - 1);
  return items[d(rng)];
}

Intention draw(std::mt19937_64& rng, const std::array<double, kNumIntentions>& weights) {
  std::discrete_distribution<std::size_t> d(weights.begin(), weights.end());
  return static_cast<Intention>(d(rng));
}

// request, suggest, command, accept, reject, question, inform
constexpr std::array<double, kNumIntentions> kOpening = {0.25, 0.2, 0.2, 0.0, 0.0, 0.2, 0.15};
constexpr std::array<double, kNumIntentions> kAfterDirective = {0.0, 0.0, 0.0, 0.35, 0.3, 0.15, 0.2};
constexpr std::array<double, kNumIntentions> kAfterQuestion = {0.05, 0.0, 0.0, 0.1, 0.1, 0.1, 0.65};
constexpr std::array<double, kNumIntentions> kFree = {0.2, 0.15, 0.15, 0.05, 0.05, 0.2, 0.2};

Utterance make_utterance(std::mt19937_64& rng, const std::string& speaker, Intention intention) {
  const auto& phrase = pick(rng, kPhrases[index(intention)]);
  std::string text;
  const auto& opener = pick(rng, kOpeners);
  if (!opener.empty()) text = opener + ", ";
  text += phrase + " " + pick(rng, kItems);
  const auto& tail = pick(rng, kTails);
  if (!tail.empty()) text += " " + tail;
  text += pick(rng, kPunct);
  if (!text.empty()) text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));

  Utterance u;
  u.speaker = speaker;
  u.text = std::move(text);
  u.words = split_words(u.text);
  u.intention = intention;
  u.keywords = std::vector<std::string>{phrase};
  return u;
}

}  // namespace

std::vector<Emotion> apply_emotion_rule(const std::vector<TurnSketch>& turns, std::size_t window) {
  std::vector<Emotion> out(turns.size(), Emotion::neutral);
  for (std::size_t t = 0; t < turns.size(); ++t) {
    const auto& speaker = turns[t].speaker;
    std::size_t lo = t > window ? t - window : 0;
    std::size_t open = t;
    for (std::size_t j = t; j-- > lo;) {
      if (turns[j].speaker == speaker && is_directive(turns[j].intention)) {
        open = j;
        break;
      }
    }
    if (open == t) continue;
    for (std::size_t k = open + 1; k < t; ++k) {
      if (turns[k].speaker == speaker) continue;
      auto answer = turns[k].intention;
      if (answer == Intention::accept) {
        out[t] = Emotion::happy;
      } else if (answer == Intention::inform) {
        out[t] = Emotion::content;
      } else if (answer == Intention::reject) {
        switch (turns[open].intention) {
          case Intention::suggest: out[t] = Emotion::disgust; break;
          default: out[t] = Emotion::sadness; break;
        }
      } else {
        continue;
      }
      break;
    }
  }
  return out;
}

std::vector<Emotion> apply_emotion_rule(const Dialogue& dialogue, std::size_t window) {
  std::vector<TurnSketch> turns;
  turns.reserve(dialogue.utterances.size());
  for (const auto& u : dialogue.utterances) {
    if (!u.intention) throw DataError("dialogue '" + dialogue.id + "' lacks gold intentions");
    turns.push_back({u.speaker, *u.intention});
  }
  return apply_emotion_rule(turns, window);
}

const std::vector<std::string>& synthetic_phrases(Intention label) { return kPhrases[index(label)]; }

Corpus gen_synthetic(std::uint64_t seed, const SyntheticOptions& options) {
  const std::size_t total = options.n_train + options.n_dev + options.n_test;
  if (total == 0) throw ConfigError("gen_synthetic needs at least one dialogue");
  if (options.min_turns == 0 || options.max_turns < options.min_turns) {
    throw ConfigError("gen_synthetic: invalid turn range");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> length(options.min_turns, options.max_turns);

  std::vector<Dialogue> dialogues;
  Splits splits;
  dialogues.reserve(total);
  for (std::size_t n = 0; n < total; ++n) {
    char id[32];
    std::snprintf(id, sizeof id, "syn%05zu", n);
    Dialogue d;
    d.id = id;
    const std::size_t turns = length(rng);
    std::vector<TurnSketch> sketch;
    for (std::size_t t = 0; t < turns; ++t) {
      std::string speaker = t % 2 == 0 ? "A" : "B";
      Intention intention;
      if (t == 0) {
        intention = draw(rng, kOpening);
      } else if (is_directive(sketch.back().intention)) {
        intention = draw(rng, kAfterDirective);
      } else if (sketch.back().intention == Intention::question) {
        intention = draw(rng, kAfterQuestion);
      } else {
        intention = draw(rng, kFree);
      }
      sketch.push_back({speaker, intention});
      d.utterances.push_back(make_utterance(rng, speaker, intention));
    }
    auto emotions = apply_emotion_rule(sketch);
    for (std::size_t t = 0; t < turns; ++t) d.utterances[t].emotion = emotions[t];

    if (n < options.n_train) {
      splits.train.push_back(d.id);
    } else if (n < options.n_train + options.n_dev) {
      splits.dev.push_back(d.id);
    } else {
      splits.test.push_back(d.id);
    }
    dialogues.push_back(std::move(d));
  }
  return Corpus(std::move(dialogues), std::move(splits));
}

Corpus gen_synthetic(std::uint64_t seed, std::size_t n_dialogues) {
  if (n_dialogues == 0) throw ConfigError("gen_synthetic needs at least one dialogue");
  SyntheticOptions options;
  options.n_dev = n_dialogues * 15 / 100;
  options.n_test = n_dialogues * 15 / 100;
  options.n_train = n_dialogues - options.n_dev - options.n_test;
  return gen_synthetic(seed, options);
}

}  // namespace rain
