#include "rain/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rain/errors.hpp"

namespace rain {

using nlohmann::json;

namespace {

constexpr std::size_t kMagicLen = sizeof(kCheckpointMagic) - 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace

std::string serialize_checkpoint(const RainModel<float>& model, const Vocabulary& vocab,
                                 const IntentionDictionary& dict) {
  json header;
  header["config"] = to_json(model.config());
  header["params"] = json::array();
  const auto& store = model.params();
  for (std::size_t i = 0; i < store.size(); ++i) {
    header["params"].push_back({{"name", store[i].name}, {"shape", {store[i].rows, store[i].cols}}});
  }
  header["vocabulary"] = vocab.words();
  header["dictionary"] = json::parse(intention_dictionary_to_json(dict));
  const std::string text = header.dump();

  std::string out(kCheckpointMagic, kMagicLen);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (std::size_t i = 0; i < store.size(); ++i) {
    for (const float v : store[i].value) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < kMagicLen + 4 || bytes.compare(0, kMagicLen, kCheckpointMagic) != 0) {
    throw DataError("not a RAIN1 checkpoint");
  }
  const std::size_t len = get_u32(bytes, kMagicLen);
  const std::size_t body = kMagicLen + 4;
  if (bytes.size() < body + len) throw DataError("checkpoint header truncated");
  json header;
  try {
    header = json::parse(bytes.substr(body, len));
  } catch (const json::parse_error& e) {
    throw DataError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  for (const char* key : {"config", "params", "vocabulary", "dictionary"}) {
    if (!header.contains(key)) throw DataError(std::string("checkpoint header missing '") + key + "'");
  }

  Checkpoint ck;
  ck.vocabulary = Vocabulary::from_words(header["vocabulary"].get<std::vector<std::string>>());
  ck.dictionary = intention_dictionary_from_json(header["dictionary"].dump());
  RainConfig config;
  try {
    config = rain_config_from_json(header["config"]);
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint config: ") + e.what());
  }
  if (config.vocab_size != ck.vocabulary.size()) throw DataError("checkpoint vocabulary size mismatch");
  ck.model = std::make_unique<RainModel<float>>(config);

  auto& store = ck.model->params();
  const auto& manifest = header["params"];
  if (!manifest.is_array() || manifest.size() != store.size()) {
    throw DataError("checkpoint manifest does not match the configured architecture");
  }
  std::size_t at = body + len;
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& p = store[i];
    const auto name = manifest[i].at("name").get<std::string>();
    const auto shape = manifest[i].at("shape").get<std::vector<std::size_t>>();
    if (name != p.name || shape.size() != 2 || shape[0] != p.rows || shape[1] != p.cols) {
      throw DataError("checkpoint parameter '" + name + "' does not match '" + p.name + "'");
    }
    if (bytes.size() < at + 4 * p.size()) throw DataError("checkpoint data truncated at '" + name + "'");
    for (auto& v : p.value) {
      v = std::bit_cast<float>(get_u32(bytes, at));
      at += 4;
    }
  }
  if (at != bytes.size()) throw DataError("checkpoint has trailing bytes");
  return ck;
}

void save_checkpoint(const RainModel<float>& model, const Vocabulary& vocab, const IntentionDictionary& dict,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  const auto bytes = serialize_checkpoint(model, vocab, dict);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize_checkpoint(buffer.str());
}

}  // namespace rain
