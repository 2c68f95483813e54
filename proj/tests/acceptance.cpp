// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rain/intent_dict.hpp"
#include "rain/metrics.hpp"
#include "rain/model.hpp"
#include "rain/model_check.hpp"
#include "rain/synthetic.hpp"
#include "rain/trainer.hpp"

using namespace rain;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

// 1
void gradient_check() {
  const auto cfg_file = read_json(std::filesystem::path(RAIN_SOURCE_DIR) / "configs/tiny.json");
  const RainConfig model = rain_config_from_json(cfg_file.at("model"));
  const auto& gc = cfg_file.at("gradcheck");
  RandomDialogueSpec spec;
  spec.dialogues = gc.at("dialogues");
  spec.utterances = gc.at("utterances");
  spec.max_tokens = gc.at("max_tokens");
  spec.seed = gc.at("seed");
  spec.vocab_size = model.vocab_size;
  diff::GradCheckOptions options;
  options.eps = gc.at("eps");
  const auto start = Clock::now();
  const auto r = check_model_gradients(model, random_dialogues(spec), options);
  const double elapsed = seconds_since(start);
  const bool ok = model.hidden == 8 && model.vocab_size == 50 && options.eps == 1e-4 &&
                  r.max_relative_error < 1e-4 && elapsed < 60.0;
  report(1, ok,
         fmt("max relative error %.3e over ", r.max_relative_error) + std::to_string(r.entries_checked) +
             " entries (worst " + r.worst_param + "), " + fmt("%.1f s", elapsed));
}

// 2
std::vector<Dialogue> toy_corpus(std::mt19937_64& rng, std::size_t utterances) {
  static const std::vector<std::string> pool = {"would", "like", "tea", "no", "way", "sure", "let",
                                                "us", "go", "why", "not", "please", "ok"};
  std::uniform_int_distribution<std::size_t> word(0, pool.size() - 1), len(1, 7), label(0, kNumIntentions - 1),
      turns(1, 6);
  std::bernoulli_distribution keyword(0.5), unlabeled(0.05);
  std::vector<Dialogue> out;
  std::size_t made = 0;
  while (made < utterances) {
    Dialogue d;
    d.id = "t" + std::to_string(out.size());
    const std::size_t n = std::min(turns(rng), utterances - made);
    for (std::size_t i = 0; i < n; ++i) {
      Utterance u;
      u.speaker = i % 2 ? "B" : "A";
      for (std::size_t k = len(rng); k > 0; --k) u.words.push_back(pool[word(rng)]);
      for (const auto& w : u.words) u.text += (u.text.empty() ? "" : " ") + w;
      if (!unlabeled(rng)) u.intention = static_cast<Intention>(label(rng));
      if (keyword(rng)) {
        std::uniform_int_distribution<std::size_t> at(0, u.words.size() - 1);
        const std::size_t s = at(rng);
        std::uniform_int_distribution<std::size_t> span(1, std::min<std::size_t>(3, u.words.size() - s));
        std::string phrase = u.words[s];
        for (std::size_t k = 1, l = span(rng); k < l; ++k) phrase += " " + u.words[s + k];
        u.keywords = std::vector<std::string>{phrase};
      }
      d.utterances.push_back(std::move(u));
    }
    made += n;
    out.push_back(std::move(d));
  }
  return out;
}

std::map<std::string, IntentionCounts> brute_force_counts(const std::vector<Dialogue>& ds, std::size_t min_count) {
  std::set<std::string> phrases;
  for (const auto& d : ds) {
    for (const auto& u : d.utterances) {
      if (u.keywords) phrases.insert(u.keywords->begin(), u.keywords->end());
    }
  }
  std::map<std::string, IntentionCounts> out;
  for (const auto& phrase : phrases) {
    IntentionCounts counts{};
    std::uint64_t total = 0;
    for (const auto& d : ds) {
      for (const auto& u : d.utterances) {
        if (!u.intention) continue;
        std::string padded = " ";
        for (const auto& w : u.words) padded += w + " ";
        if (padded.find(" " + phrase + " ") != std::string::npos) {
          ++counts[index(*u.intention)];
          ++total;
        }
      }
    }
    if (total >= min_count) out[phrase] = counts;
  }
  return out;
}

void dictionary_oracle() {
  std::mt19937_64 rng(20);
  std::uniform_int_distribution<std::size_t> size(1, 200);
  int matched = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto ds = toy_corpus(rng, size(rng));
    std::vector<const Dialogue*> ptrs;
    for (const auto& d : ds) ptrs.push_back(&d);
    const std::size_t min_count = 1 + trial % 3;
    const auto dict = build_intention_dictionary(ptrs, {min_count});
    const auto expected = brute_force_counts(ds, min_count);
    bool same = dict.size() == expected.size();
    for (const auto& [phrase, counts] : expected) {
      const auto* e = dict.find(phrase);
      if (!e || e->counts != counts) {
        same = false;
        continue;
      }
      double total = 0;
      for (auto c : counts) total += static_cast<double>(c);
      for (std::size_t k = 0; k < kNumIntentions; ++k) same = same && e->p[k] == static_cast<double>(counts[k]) / total;
    }
    matched += same;
  }
  report(2, matched == 20, std::to_string(matched) + "/20 randomized corpora match exactly");
}

// 3
double oracle_macro_f1(const std::vector<std::size_t>& gold, const std::vector<std::size_t>& pred, std::size_t n) {
  double total = 0;
  std::size_t classes = 0;
  for (std::size_t c = 0; c < n; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      tp += gold[i] == c && pred[i] == c;
      fp += gold[i] != c && pred[i] == c;
      fn += gold[i] == c && pred[i] != c;
    }
    if (tp + fn == 0) continue;
    ++classes;
    const double p = tp + fp == 0 ? 0.0 : tp / (tp + fp);
    const double r = tp / (tp + fn);
    total += p + r == 0 ? 0.0 : 2 * p * r / (p + r);
  }
  return total / static_cast<double>(classes);
}

std::vector<std::string> class_names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("c" + std::to_string(i));
  return out;
}

void metrics_oracle() {
  const std::vector<std::size_t> gold = {0, 0, 0, 1, 2}, pred = {0, 0, 1, 1, 2};
  const double worked = compute_metrics(gold, pred, class_names(3)).macro_f1;
  bool ok = std::abs(worked - oracle_macro_f1(gold, pred, 3)) <= 1e-9 && std::abs(worked - 0.8222) < 5e-5;

  std::mt19937_64 rng(3);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = trial % 2 ? kNumIntentions : kNumEmotions;
    std::uniform_int_distribution<std::size_t> label(0, n - 1), size(1, 500);
    std::bernoulli_distribution correct(0.6);
    std::vector<std::size_t> g(size(rng)), p(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] = label(rng);
      p[i] = correct(rng) ? g[i] : label(rng);
    }
    worst = std::max(worst, std::abs(compute_metrics(g, p, class_names(n)).macro_f1 - oracle_macro_f1(g, p, n)));
  }
  ok = ok && worst <= 1e-9;
  report(3, ok, fmt("worked case %.6f; max deviation over 20 random sets %.1e", worked, worst));
}

// 4
void loss_arithmetic() {
  RainConfig c;
  c.hidden = 8;
  c.embed_dim = 8;
  c.vocab_size = 10;
  c.lambda1 = 0.5;
  c.lambda2 = 0.5;
  RainModel<double> model(c);
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    auto& v = model.params()[i].value;
    std::fill(v.begin(), v.end(), 0.0);
  }
  PreparedDialogue d;
  d.id = "one";
  PreparedUtterance u;
  u.speaker = "A";
  u.tokens = {2, 3, 4};
  u.intention = Intention::suggest;
  u.emotion = Emotion::happy;
  d.utterances.push_back(u);
  diff::Tape<double> tape;
  const auto turns = model.forward(tape, d);
  const double l = model.loss(tape, turns, d, 1).total.scalar();
  const double expected = 0.5 * (std::log(7.0) + std::log(6.0));
  report(4, std::abs(l - expected) <= 1e-6, fmt("L = %.12f, expected %.12f", l, expected));
}

// 5
std::vector<PreparedDialogue> random_set(std::uint64_t seed, std::size_t vocab) {
  RandomDialogueSpec s;
  s.dialogues = 6;
  s.utterances = 7;
  s.vocab_size = vocab;
  s.max_tokens = 8;
  s.seed = seed;
  return random_dialogues(s);
}

void invariants() {
  std::vector<std::string> broken;
  const std::size_t vocab = 40;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RainConfig c;
    c.hidden = 16;
    c.embed_dim = 16;
    c.vocab_size = vocab;
    c.init_seed = seed + 1;
    c.emotion_encoder = static_cast<EncoderKind>(seed % 3);
    RainModel<float> model(c);
    auto no_dict_config = c;
    no_dict_config.flags.use_dict = false;
    RainModel<float> no_dict(no_dict_config);

    for (const auto& d : random_set(seed, vocab)) {
      const auto acts = model.dialogue_forward(d);
      for (const auto& a : acts) {
        for (float v : a.f) {
          if (!(v > -1.0f && v < 1.0f)) broken.push_back("fusion range");
        }
        for (float v : a.g_tilde) {
          if (!(v >= 0.0f)) broken.push_back("emotion vector sign");
        }
        double sm = 0, se = 0;
        for (float v : a.y_m) sm += v;
        for (float v : a.y_e) se += v;
        if (std::abs(sm - 1.0) > 1e-6 || std::abs(se - 1.0) > 1e-6) broken.push_back("softmax sum");
      }
      for (std::size_t cut = 1; cut < d.utterances.size(); ++cut) {
        auto prefix = d;
        prefix.utterances.resize(cut);
        const auto part = model.dialogue_forward(prefix);
        for (std::size_t i = 0; i < cut; ++i) {
          if (part[i].y_m != acts[i].y_m || part[i].y_e != acts[i].y_e || part[i].h != acts[i].h) {
            broken.push_back("causality");
          }
        }
      }
      auto zero_prior = d;
      for (auto& u : zero_prior.utterances) u.prior = {};
      const auto a = model.dialogue_forward(zero_prior);
      const auto b = no_dict.dialogue_forward(d);
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].y_m != b[i].y_m || a[i].y_e != b[i].y_e || a[i].g_tilde != b[i].g_tilde) {
          broken.push_back("zero prior vs disabled dictionary");
        }
      }
    }
  }

  SyntheticOptions o;
  o.n_train = 80;
  o.n_dev = 20;
  o.n_test = 20;
  const auto corpus = gen_synthetic(99, o);
  const auto dict = build_intention_dictionary(corpus);
  RainConfig c;
  c.hidden = 16;
  c.embed_dim = 16;
  TrainConfig t;
  t.epochs = 3;
  const auto first = epoch_csv(train(corpus, dict, c, t).history);
  const auto second = epoch_csv(train(corpus, dict, c, t).history);
  if (first != second) broken.push_back("seeded determinism");

  std::set<std::string> kinds(broken.begin(), broken.end());
  std::string detail = broken.empty() ? "ranges, softmax sums, causality, zero-prior equivalence, determinism hold"
                                      : "violated:";
  for (const auto& k : kinds) detail += " [" + k + "]";
  report(5, broken.empty(), detail);
}

// 6-8 share the shipped synthetic configuration.
struct SyntheticSetup {
  Corpus corpus;
  IntentionDictionary dict;
  RainConfig model;
  TrainConfig train;
};

SyntheticSetup synthetic_setup() {
  const auto cfg = read_json(std::filesystem::path(RAIN_SOURCE_DIR) / "configs/synthetic.json");
  const auto& syn = cfg.at("data").at("synthetic");
  SyntheticOptions o;
  o.n_train = syn.at("n_train");
  o.n_dev = syn.at("n_dev");
  o.n_test = syn.at("n_test");
  o.min_turns = syn.at("min_turns");
  o.max_turns = syn.at("max_turns");
  SyntheticSetup s{gen_synthetic(syn.at("seed").get<std::uint64_t>(), o), {}, {}, {}};
  DictBuildOptions dict_options;
  dict_options.min_count = cfg.at("dict").at("min_count");
  s.dict = build_intention_dictionary(s.corpus, dict_options);
  apply_rain_config_json(s.model, cfg.at("model"));
  apply_train_config_json(s.train, cfg.at("train"));
  return s;
}

// Synthetic text is a function of the intention plus noise, so without
// history the best emotion guess depends on the intention alone. Majority
// emotion per intention, counted on train, scored on test.
double history_free_oracle_f1(const SyntheticSetup& s) {
  std::array<std::array<std::size_t, kNumEmotions>, kNumIntentions> counts{};
  for (const auto* d : s.corpus.split(Split::train)) {
    for (const auto& u : d->utterances) ++counts[index(*u.intention)][index(*u.emotion)];
  }
  std::vector<std::size_t> gold, pred;
  for (const auto* d : s.corpus.split(Split::test)) {
    for (const auto& u : d->utterances) {
      const auto& row = counts[index(*u.intention)];
      gold.push_back(index(*u.emotion));
      pred.push_back(static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()));
    }
  }
  return compute_metrics(gold, pred, label_names(kEmotionNames)).macro_f1;
}

void ablation(const SyntheticSetup& s) {
  const auto start = Clock::now();
  const auto rows = ablate(s.corpus, s.dict, s.model, s.train);
  AblationFlags no_history_flags;
  no_history_flags.use_history = false;
  const auto no_history = train_variant(s.corpus, s.dict, s.model, s.train, no_history_flags, false);
  const double elapsed = seconds_since(start);

  std::printf("%s", ablation_csv(rows).c_str());
  std::printf("no-history,-,-,%.2f,%+.2f\n", 100.0 * no_history.second,
              100.0 * (no_history.second - rows.front().emotion_f1));

  const auto& base = rows.front();
  const auto& full = rows.back();
  const double gap = 100.0 * (full.emotion_f1 - no_history.second);
  const bool a = gap >= 10.0;

  bool b = true;
  bool c = true;
  std::string b_detail, c_detail;
  for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
    const auto& r = rows[i];
    const bool affects_intention = r.name == "+dictionary" || r.name == "+multi-task";
    const bool affects_emotion = r.name != "+dictionary";
    if (affects_intention && *r.intention_f1 < *base.intention_f1 - 0.01) {
      b = false;
      b_detail += " " + r.name + "/intention";
    }
    if (affects_emotion && r.emotion_f1 < base.emotion_f1 - 0.01) {
      b = false;
      b_detail += " " + r.name + "/emotion";
    }
    if (full.emotion_f1 < r.emotion_f1) {
      c = false;
      c_detail += " " + r.name;
    }
  }
  const bool ok = a && b && c && elapsed < 15 * 60;
  report(6, ok,
         fmt("(a) full - no-history emotion = %+.2f points; ", gap) + "(b) " + (b ? "ok" : "below base:" + b_detail) +
             "; (c) " + (c ? "ok" : "full below:" + c_detail) +
             fmt("; %.0f s; history-free oracle emotion F1 %.2f", elapsed, 100.0 * history_free_oracle_f1(s)));
}

void learnability_and_curve(const SyntheticSetup& s) {
  const auto result = train(s.corpus, s.dict, s.model, s.train);
  const auto test = evaluate(*result.model, s.corpus, Split::test, s.dict);
  report(7, test.intention.macro_f1 >= 0.90,
         fmt("test intention macro-F1 %.4f (emotion %.4f)", test.intention.macro_f1, test.emotion.macro_f1));

  const auto path = std::filesystem::temp_directory_path() / "rain_acceptance_epochs.csv";
  write_epoch_csv(result.history, path);
  std::ifstream in(path);
  std::string line;
  std::size_t rows = 0;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (!line.empty()) ++rows;
  }
  std::filesystem::remove(path);
  report(8, rows == s.train.epochs,
         std::to_string(rows) + " data rows for " + std::to_string(s.train.epochs) + " epochs");
}

}  // namespace

int main() {
  auto guarded = [](int id, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(id, false, std::string("error: ") + e.what());
    }
  };
  guarded(1, gradient_check);
  guarded(2, dictionary_oracle);
  guarded(3, metrics_oracle);
  guarded(4, loss_arithmetic);
  guarded(5, invariants);
  SyntheticSetup setup;
  try {
    setup = synthetic_setup();
  } catch (const std::exception& e) {
    report(6, false, std::string("error: ") + e.what());
    report(7, false, "no synthetic setup");
    report(8, false, "no synthetic setup");
    return 1;
  }
  guarded(6, [&] { ablation(setup); });
  guarded(7, [&] { learnability_and_curve(setup); });
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
