#include "rain/labels.hpp"

#include "rain/errors.hpp"

namespace rain {

std::string_view to_string(Intention label) { return kIntentionNames.at(index(label)); }
std::string_view to_string(Emotion label) { return kEmotionNames.at(index(label)); }

std::optional<Intention> try_parse_intention(std::string_view name) {
  for (std::size_t i = 0; i < kIntentionNames.size(); ++i) {
    if (kIntentionNames[i] == name) return static_cast<Intention>(i);
  }
  return std::nullopt;
}

std::optional<Emotion> try_parse_emotion(std::string_view name) {
  for (std::size_t i = 0; i < kEmotionNames.size(); ++i) {
    if (kEmotionNames[i] == name) return static_cast<Emotion>(i);
  }
  return std::nullopt;
}

Intention parse_intention(std::string_view name) {
  if (auto label = try_parse_intention(name)) return *label;
  throw LabelError(std::string(name));
}

Emotion parse_emotion(std::string_view name) {
  if (auto label = try_parse_emotion(name)) return *label;
  throw LabelError(std::string(name));
}

}  // namespace rain
