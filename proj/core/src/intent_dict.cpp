#include "rain/intent_dict.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "rain/errors.hpp"

namespace rain {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string join(const std::vector<std::string>& words, std::size_t begin, std::size_t len) {
  std::string out = words[begin];
  for (std::size_t i = begin + 1; i < begin + len; ++i) {
    out += ' ';
    out += words[i];
  }
  return out;
}

IntentionDistribution normalize(const IntentionCounts& counts) {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  IntentionDistribution p{};
  for (std::size_t i = 0; i < kNumIntentions; ++i) {
    p[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
  }
  return p;
}

}  // namespace

IntentionDictionary IntentionDictionary::from_counts(const std::map<std::string, IntentionCounts>& counts) {
  IntentionDictionary dict;
  for (const auto& [phrase, row] : counts) {
    if (phrase.empty()) throw DataError("intention dictionary phrase is empty");
    std::uint64_t total = 0;
    for (auto c : row) total += c;
    if (total == 0) throw DataError("intention dictionary phrase '" + phrase + "' has no counts");
    dict.entries_.emplace(phrase, Entry{row, normalize(row)});
  }
  return dict;
}

const IntentionDictionary::Entry* IntentionDictionary::find(const std::string& phrase) const {
  auto it = entries_.find(phrase);
  return it == entries_.end() ? nullptr : &it->second;
}

IntentionDistribution IntentionDictionary::lookup(const std::vector<std::string>& words) const {
  IntentionDistribution sum{};
  std::size_t matches = 0;
  std::size_t i = 0;
  while (i < words.size()) {
    std::size_t matched_len = 0;
    for (std::size_t len = std::min(kMaxPhraseTokens, words.size() - i); len > 0; --len) {
      if (const auto* e = find(join(words, i, len))) {
        for (std::size_t k = 0; k < kNumIntentions; ++k) sum[k] += e->p[k];
        ++matches;
        matched_len = len;
        break;
      }
    }
    i += matched_len > 0 ? matched_len : 1;
  }
  if (matches > 0) {
    for (auto& v : sum) v /= static_cast<double>(matches);
  }
  return sum;
}

IntentionDictionary build_intention_dictionary(const std::vector<const Dialogue*>& train,
                                               const DictBuildOptions& options) {
  std::set<std::string> phrases;
  for (const auto* d : train) {
    for (const auto& u : d->utterances) {
      if (u.keywords) phrases.insert(u.keywords->begin(), u.keywords->end());
    }
  }
  if (phrases.empty()) {
    std::cerr << "warning: no keyword annotations in the training split; "
                 "intention dictionary is empty\n";
    return {};
  }

  std::map<std::string, IntentionCounts> counts;
  std::unordered_set<std::string> grams;
  for (const auto* d : train) {
    for (const auto& u : d->utterances) {
      if (!u.intention) continue;
      grams.clear();
      for (std::size_t i = 0; i < u.words.size(); ++i) {
        for (std::size_t len = 1; len <= kMaxPhraseTokens && i + len <= u.words.size(); ++len) {
          grams.insert(join(u.words, i, len));
        }
      }
      for (const auto& g : grams) {
        if (phrases.count(g)) counts[g][index(*u.intention)] += 1;
      }
    }
  }

  std::map<std::string, IntentionCounts> kept;
  for (const auto& [phrase, row] : counts) {
    std::uint64_t total = 0;
    for (auto c : row) total += c;
    if (total >= options.min_count && total > 0) kept.emplace(phrase, row);
  }
  return IntentionDictionary::from_counts(kept);
}

IntentionDictionary build_intention_dictionary(const Corpus& corpus, const DictBuildOptions& options) {
  return build_intention_dictionary(corpus.split(Split::train), options);
}

std::string intention_dictionary_to_json(const IntentionDictionary& dict) {
  ordered_json node;
  node["version"] = kIntentDictVersion;
  node["labels"] = ordered_json::array();
  for (auto name : kIntentionNames) node["labels"].push_back(std::string(name));
  node["entries"] = ordered_json::object();
  for (const auto& [phrase, e] : dict.entries()) {
    ordered_json entry;
    entry["counts"] = e.counts;
    entry["p"] = e.p;
    node["entries"][phrase] = std::move(entry);
  }
  return node.dump(1);
}

IntentionDictionary intention_dictionary_from_json(const std::string& text) {
  json node;
  try {
    node = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed intention dictionary: ") + e.what());
  }
  if (!node.is_object()) throw DataError("intention dictionary is not an object");
  if (!node.contains("version") || !node["version"].is_number_integer() ||
      node["version"].get<int>() != kIntentDictVersion) {
    throw DataError("intention dictionary version mismatch (expected " + std::to_string(kIntentDictVersion) + ")");
  }
  if (!node.contains("labels") || !node["labels"].is_array() || node["labels"].size() != kNumIntentions) {
    throw DataError("intention dictionary must list the 7 intention labels");
  }
  for (std::size_t i = 0; i < kNumIntentions; ++i) {
    if (!node["labels"][i].is_string()) throw DataError("intention dictionary label is not a string");
    const auto name = node["labels"][i].get<std::string>();
    if (name != kIntentionNames[i]) throw LabelError(name);
  }
  if (!node.contains("entries") || !node["entries"].is_object()) {
    throw DataError("intention dictionary missing 'entries'");
  }

  std::map<std::string, IntentionCounts> counts;
  std::map<std::string, IntentionDistribution> probs;
  for (const auto& [phrase, entry] : node["entries"].items()) {
    auto words = split_words(phrase);
    if (words.empty() || words.size() > kMaxPhraseTokens) {
      throw DataError("intention dictionary phrase '" + phrase + "' must have 1-3 tokens");
    }
    if (!entry.is_object() || !entry.contains("counts") || !entry.contains("p") || !entry["counts"].is_array() ||
        !entry["p"].is_array() || entry["counts"].size() != kNumIntentions || entry["p"].size() != kNumIntentions) {
      throw DataError("intention dictionary entry '" + phrase + "' needs 7 counts and 7 probabilities");
    }
    IntentionCounts c{};
    IntentionDistribution p{};
    double sum = 0.0;
    for (std::size_t i = 0; i < kNumIntentions; ++i) {
      if (!entry["counts"][i].is_number_unsigned() && !(entry["counts"][i].is_number_integer() &&
                                                        entry["counts"][i].get<std::int64_t>() >= 0)) {
        throw DataError("intention dictionary entry '" + phrase + "' has an invalid count");
      }
      if (!entry["p"][i].is_number()) throw DataError("intention dictionary entry '" + phrase + "' has a non-numeric p");
      c[i] = entry["counts"][i].get<std::uint64_t>();
      p[i] = entry["p"][i].get<double>();
      if (!(p[i] >= 0.0)) throw DataError("intention dictionary entry '" + phrase + "' has a negative p");
      sum += p[i];
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw DataError("intention dictionary entry '" + phrase + "' sums to " + std::to_string(sum));
    }
    counts.emplace(phrase, c);
    probs.emplace(phrase, p);
  }

  auto dict = IntentionDictionary::from_counts(counts);
  for (const auto& [phrase, p] : probs) {
    const auto& expected = dict.find(phrase)->p;
    for (std::size_t i = 0; i < kNumIntentions; ++i) {
      if (std::abs(expected[i] - p[i]) > 1e-9) {
        throw DataError("intention dictionary entry '" + phrase + "': p does not match normalized counts");
      }
    }
  }
  return dict;
}

void save_intention_dictionary(const IntentionDictionary& dict, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << intention_dictionary_to_json(dict) << "\n";
}

IntentionDictionary load_intention_dictionary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return intention_dictionary_from_json(buffer.str());
}

}  // namespace rain
