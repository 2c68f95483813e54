#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rain/labels.hpp"

namespace rain {

using TokenId = std::int32_t;

// Lowercase, split on whitespace, peel trailing punctuation into separate
// tokens. "Coca-Cola, please" -> {"coca-cola", ",", "please"}.
std::vector<std::string> split_words(std::string_view text);

class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;

  Vocabulary();

  // Adds the word if absent; returns its id.
  TokenId add(const std::string& word);
  TokenId lookup(const std::string& word) const;
  const std::string& word(TokenId id) const;
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

  std::vector<TokenId> encode(const std::vector<std::string>& words) const;

  // Rebuilds from the id-ordered word list (including the reserved entries).
  static Vocabulary from_words(const std::vector<std::string>& words);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.words_ == b.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> ids_;
};

std::vector<TokenId> tokenize(std::string_view text, const Vocabulary& vocab);

struct Utterance {
  std::string speaker;
  std::string text;
  std::vector<std::string> words;
  std::vector<TokenId> tokens;
  std::optional<Intention> intention;
  std::optional<Emotion> emotion;
  std::optional<std::vector<std::string>> keywords;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct Dialogue {
  std::string id;
  std::vector<Utterance> utterances;

  friend bool operator==(const Dialogue&, const Dialogue&) = default;
};

enum class Split { train, dev, test };
std::string_view to_string(Split split);

struct Splits {
  std::vector<std::string> train;
  std::vector<std::string> dev;
  std::vector<std::string> test;

  friend bool operator==(const Splits&, const Splits&) = default;
};

// Immutable after construction. Dialogue order follows the source file.
class Corpus {
 public:
  Corpus() = default;
  // Validates the splits (disjoint, covering), builds the vocabulary from the
  // train split and tokenizes every utterance with it.
  Corpus(std::vector<Dialogue> dialogues, Splits splits);
  // Uses an existing vocabulary (e.g. from a checkpoint) instead of building one.
  Corpus(std::vector<Dialogue> dialogues, Splits splits, Vocabulary vocab);

  const std::vector<Dialogue>& dialogues() const { return dialogues_; }
  const Splits& splits() const { return splits_; }
  const Vocabulary& vocabulary() const { return vocab_; }

  std::vector<const Dialogue*> split(Split which) const;
  const Dialogue& by_id(const std::string& id) const;

  // Number of dialogues in a split (K in the loss normalization).
  std::size_t size(Split which) const;

 private:
  void index_and_validate();
  void retokenize();

  std::vector<Dialogue> dialogues_;
  Splits splits_;
  Vocabulary vocab_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::unordered_map<std::string, Split> split_of_;
};

// Parses one dialogue per line. Labels and keywords are optional. Throws
// ParseError (with line number) for malformed lines and LabelError for
// unknown label strings.
std::vector<Dialogue> read_dialogues_jsonl(const std::filesystem::path& path);
std::vector<Dialogue> parse_dialogues_jsonl(std::string_view content);

Splits read_splits(const std::filesystem::path& path);
void write_splits(const Splits& splits, const std::filesystem::path& path);

// Without a splits file every dialogue is placed in train.
Corpus load_jsonl(const std::filesystem::path& path);
Corpus load_jsonl(const std::filesystem::path& path, const std::filesystem::path& splits_path);

std::string dialogue_to_json_line(const Dialogue& dialogue);
void save_jsonl(const std::vector<Dialogue>& dialogues, const std::filesystem::path& path);
void save_jsonl(const Corpus& corpus, const std::filesystem::path& path);

}  // namespace rain
