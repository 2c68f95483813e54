#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rain/corpus.hpp"
#include "rain/labels.hpp"

namespace rain {

using IntentionCounts = std::array<std::uint64_t, kNumIntentions>;
using IntentionDistribution = std::array<double, kNumIntentions>;

inline constexpr int kIntentDictVersion = 1;
inline constexpr std::size_t kMaxPhraseTokens = 3;

// Feature phrase -> distribution over intentions, built by counting how many
// training utterances of each gold intention contain the phrase.
// Immutable once built; lookups are safe from any thread.
class IntentionDictionary {
 public:
  struct Entry {
    IntentionCounts counts{};
    IntentionDistribution p{};
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  IntentionDictionary() = default;
  // Normalizes each count row; rows summing to zero are rejected.
  static IntentionDictionary from_counts(const std::map<std::string, IntentionCounts>& counts);

  const std::map<std::string, Entry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const Entry* find(const std::string& phrase) const;

  // Greedy longest match, left to right, non-overlapping. Returns the mean of
  // the matched distributions, or all zeros when nothing matches.
  IntentionDistribution lookup(const std::vector<std::string>& words) const;

  friend bool operator==(const IntentionDictionary&, const IntentionDictionary&) = default;

 private:
  std::map<std::string, Entry> entries_;
};

struct DictBuildOptions {
  std::size_t min_count = 2;
};

// Phrases are the union of `keywords` annotations on the given dialogues.
// Utterances without a gold intention contribute no counts.
IntentionDictionary build_intention_dictionary(const std::vector<const Dialogue*>& train,
                                               const DictBuildOptions& options = {});
IntentionDictionary build_intention_dictionary(const Corpus& corpus, const DictBuildOptions& options = {});

std::string intention_dictionary_to_json(const IntentionDictionary& dict);
IntentionDictionary intention_dictionary_from_json(const std::string& text);
void save_intention_dictionary(const IntentionDictionary& dict, const std::filesystem::path& path);
IntentionDictionary load_intention_dictionary(const std::filesystem::path& path);

}  // namespace rain
