#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "rain/corpus.hpp"
#include "rain/intent_dict.hpp"
#include "rain/model.hpp"

namespace rain {

// Binary layout:
//   "RAIN1"
//   uint32 little-endian byte length of the header
//   header: UTF-8 JSON {"config": ..., "params": [{"name", "shape": [rows, cols]}...],
//                       "vocabulary": [...], "dictionary": {...}}
//   per parameter, in manifest order: rows*cols little-endian float32
inline constexpr char kCheckpointMagic[] = "RAIN1";

struct Checkpoint {
  std::unique_ptr<RainModel<float>> model;
  Vocabulary vocabulary;
  IntentionDictionary dictionary;
};

std::string serialize_checkpoint(const RainModel<float>& model, const Vocabulary& vocab,
                                 const IntentionDictionary& dict);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const RainModel<float>& model, const Vocabulary& vocab, const IntentionDictionary& dict,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rain
