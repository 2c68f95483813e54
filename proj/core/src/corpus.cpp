#include "rain/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "rain/errors.hpp"

namespace rain {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string normalize_keyword(const std::string& raw, std::size_t line) {
  auto words = split_words(raw);
  if (words.empty() || words.size() > 3) {
    throw ParseError(line, "keyword '" + raw + "' must have 1-3 tokens");
  }
  std::string out = words.front();
  for (std::size_t i = 1; i < words.size(); ++i) out += " " + words[i];
  return out;
}

Utterance parse_utterance(const json& node, std::size_t line) {
  if (!node.is_object()) throw ParseError(line, "utterance is not an object");
  Utterance u;
  if (!node.contains("text") || !node["text"].is_string()) {
    throw ParseError(line, "utterance missing string field 'text'");
  }
  u.text = node["text"].get<std::string>();
  if (u.text.empty()) throw ParseError(line, "utterance text is empty");
  if (node.contains("speaker")) {
    if (!node["speaker"].is_string()) throw ParseError(line, "'speaker' is not a string");
    u.speaker = node["speaker"].get<std::string>();
  }
  if (node.contains("intention") && !node["intention"].is_null()) {
    if (!node["intention"].is_string()) throw ParseError(line, "'intention' is not a string");
    u.intention = parse_intention(node["intention"].get<std::string>());
  }
  if (node.contains("emotion") && !node["emotion"].is_null()) {
    if (!node["emotion"].is_string()) throw ParseError(line, "'emotion' is not a string");
    u.emotion = parse_emotion(node["emotion"].get<std::string>());
  }
  if (node.contains("keywords") && !node["keywords"].is_null()) {
    if (!node["keywords"].is_array()) throw ParseError(line, "'keywords' is not an array");
    std::vector<std::string> keywords;
    for (const auto& k : node["keywords"]) {
      if (!k.is_string()) throw ParseError(line, "keyword is not a string");
      keywords.push_back(normalize_keyword(k.get<std::string>(), line));
    }
    u.keywords = std::move(keywords);
  }
  u.words = split_words(u.text);
  return u;
}

Dialogue parse_dialogue(std::string_view text, std::size_t line) {
  json node;
  try {
    node = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(line, std::string("malformed JSON: ") + e.what());
  }
  if (!node.is_object()) throw ParseError(line, "dialogue is not an object");
  if (!node.contains("id") || !node["id"].is_string()) {
    throw ParseError(line, "dialogue missing string field 'id'");
  }
  if (!node.contains("utterances") || !node["utterances"].is_array()) {
    throw ParseError(line, "dialogue missing array field 'utterances'");
  }
  Dialogue d;
  d.id = node["id"].get<std::string>();
  for (const auto& u : node["utterances"]) d.utterances.push_back(parse_utterance(u, line));
  if (d.utterances.empty()) throw ParseError(line, "dialogue '" + d.id + "' has no utterances");
  return d;
}

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (start == i) continue;
    std::string chunk(text.substr(start, i - start));
    std::transform(chunk.begin(), chunk.end(), chunk.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    std::size_t end = chunk.size();
    while (end > 0 && is_punct(chunk[end - 1])) --end;
    if (end > 0) out.push_back(chunk.substr(0, end));
    for (std::size_t p = end; p < chunk.size(); ++p) out.emplace_back(1, chunk[p]);
  }
  return out;
}

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<unk>");
}

TokenId Vocabulary::add(const std::string& word) {
  auto it = ids_.find(word);
  if (it != ids_.end()) return it->second;
  auto id = static_cast<TokenId>(words_.size());
  words_.push_back(word);
  ids_.emplace(word, id);
  return id;
}

TokenId Vocabulary::lookup(const std::string& word) const {
  auto it = ids_.find(word);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::word(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= words_.size()) {
    throw DataError("token id " + std::to_string(id) + " outside vocabulary");
  }
  return words_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocabulary::encode(const std::vector<std::string>& words) const {
  std::vector<TokenId> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(lookup(w));
  return ids;
}

Vocabulary Vocabulary::from_words(const std::vector<std::string>& words) {
  if (words.size() < 2 || words[0] != "<pad>" || words[1] != "<unk>") {
    throw DataError("vocabulary must start with <pad>, <unk>");
  }
  Vocabulary v;
  for (std::size_t i = 2; i < words.size(); ++i) {
    if (v.ids_.count(words[i])) throw DataError("duplicate vocabulary entry '" + words[i] + "'");
    v.add(words[i]);
  }
  return v;
}

std::vector<TokenId> tokenize(std::string_view text, const Vocabulary& vocab) {
  return vocab.encode(split_words(text));
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "?";
}

Corpus::Corpus(std::vector<Dialogue> dialogues, Splits splits)
    : dialogues_(std::move(dialogues)), splits_(std::move(splits)) {
  index_and_validate();
  for (const auto& id : splits_.train) {
    for (const auto& u : dialogues_[by_id_.at(id)].utterances) {
      for (const auto& w : u.words) vocab_.add(w);
    }
  }
  retokenize();
}

Corpus::Corpus(std::vector<Dialogue> dialogues, Splits splits, Vocabulary vocab)
    : dialogues_(std::move(dialogues)), splits_(std::move(splits)), vocab_(std::move(vocab)) {
  index_and_validate();
  retokenize();
}

void Corpus::index_and_validate() {
  for (std::size_t i = 0; i < dialogues_.size(); ++i) {
    const auto& d = dialogues_[i];
    if (d.utterances.empty()) throw DataError("dialogue '" + d.id + "' has no utterances");
    if (!by_id_.emplace(d.id, i).second) throw DataError("duplicate dialogue id '" + d.id + "'");
  }
  auto claim = [&](const std::vector<std::string>& ids, Split which) {
    for (const auto& id : ids) {
      if (!by_id_.count(id)) {
        throw DataError("split " + std::string(to_string(which)) + " names unknown dialogue '" + id + "'");
      }
      if (!split_of_.emplace(id, which).second) {
        throw DataError("dialogue '" + id + "' appears in more than one split");
      }
    }
  };
  claim(splits_.train, Split::train);
  claim(splits_.dev, Split::dev);
  claim(splits_.test, Split::test);
  for (const auto& d : dialogues_) {
    if (!split_of_.count(d.id)) throw DataError("dialogue '" + d.id + "' is not assigned to a split");
  }
}

void Corpus::retokenize() {
  for (auto& d : dialogues_) {
    for (auto& u : d.utterances) u.tokens = vocab_.encode(u.words);
  }
}

std::vector<const Dialogue*> Corpus::split(Split which) const {
  const auto& ids = which == Split::train ? splits_.train : which == Split::dev ? splits_.dev : splits_.test;
  std::vector<const Dialogue*> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(&dialogues_[by_id_.at(id)]);
  return out;
}

const Dialogue& Corpus::by_id(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw DataError("unknown dialogue id '" + id + "'");
  return dialogues_[it->second];
}

std::size_t Corpus::size(Split which) const {
  switch (which) {
    case Split::train: return splits_.train.size();
    case Split::dev: return splits_.dev.size();
    case Split::test: return splits_.test.size();
  }
  return 0;
}

std::vector<Dialogue> parse_dialogues_jsonl(std::string_view content) {
  std::vector<Dialogue> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t nl = content.find('\n', pos);
    if (nl == std::string_view::npos) nl = content.size();
    std::string_view line = content.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (std::all_of(line.begin(), line.end(), is_space)) continue;
    out.push_back(parse_dialogue(line, line_no));
  }
  return out;
}

std::vector<Dialogue> read_dialogues_jsonl(const std::filesystem::path& path) {
  return parse_dialogues_jsonl(read_file(path));
}

Splits read_splits(const std::filesystem::path& path) {
  json node;
  try {
    node = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError("malformed splits file " + path.string() + ": " + e.what());
  }
  Splits s;
  auto take = [&](const char* key, std::vector<std::string>& dst) {
    if (!node.contains(key)) return;
    if (!node[key].is_array()) throw DataError(std::string("splits field '") + key + "' is not an array");
    for (const auto& id : node[key]) {
      if (!id.is_string()) throw DataError("split ids must be strings");
      dst.push_back(id.get<std::string>());
    }
  };
  if (!node.is_object()) throw DataError("splits file is not an object");
  for (const auto& [key, _] : node.items()) {
    if (key != "train" && key != "dev" && key != "test") throw DataError("unknown splits key '" + key + "'");
  }
  take("train", s.train);
  take("dev", s.dev);
  take("test", s.test);
  return s;
}

void write_splits(const Splits& splits, const std::filesystem::path& path) {
  ordered_json node;
  node["train"] = splits.train;
  node["dev"] = splits.dev;
  node["test"] = splits.test;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << node.dump() << "\n";
}

Corpus load_jsonl(const std::filesystem::path& path) {
  auto dialogues = read_dialogues_jsonl(path);
  Splits splits;
  for (const auto& d : dialogues) splits.train.push_back(d.id);
  return Corpus(std::move(dialogues), std::move(splits));
}

Corpus load_jsonl(const std::filesystem::path& path, const std::filesystem::path& splits_path) {
  return Corpus(read_dialogues_jsonl(path), read_splits(splits_path));
}

std::string dialogue_to_json_line(const Dialogue& dialogue) {
  ordered_json node;
  node["id"] = dialogue.id;
  node["utterances"] = ordered_json::array();
  for (const auto& u : dialogue.utterances) {
    ordered_json un;
    un["speaker"] = u.speaker;
    un["text"] = u.text;
    if (u.intention) un["intention"] = std::string(to_string(*u.intention));
    if (u.emotion) un["emotion"] = std::string(to_string(*u.emotion));
    if (u.keywords) un["keywords"] = *u.keywords;
    node["utterances"].push_back(std::move(un));
  }
  return node.dump();
}

void save_jsonl(const std::vector<Dialogue>& dialogues, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& d : dialogues) out << dialogue_to_json_line(d) << "\n";
}

void save_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
  save_jsonl(corpus.dialogues(), path);
}

}  // namespace rain
