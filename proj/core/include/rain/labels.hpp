#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace rain {

// Index order is fixed and shared by every module, file format and head.
enum class Intention : std::uint8_t { request, suggest, command, accept, reject, question, inform };
enum class Emotion : std::uint8_t { happy, neutral, sadness, anger, content, disgust };

inline constexpr std::size_t kNumIntentions = 7;
inline constexpr std::size_t kNumEmotions = 6;

inline constexpr std::array<std::string_view, kNumIntentions> kIntentionNames = {
    "request", "suggest", "command", "accept", "reject", "question", "inform"};
inline constexpr std::array<std::string_view, kNumEmotions> kEmotionNames = {
    "happy", "neutral", "sadness", "anger", "content", "disgust"};

std::string_view to_string(Intention label);
std::string_view to_string(Emotion label);

// Both throw LabelError naming the offending string.
Intention parse_intention(std::string_view name);
Emotion parse_emotion(std::string_view name);

std::optional<Intention> try_parse_intention(std::string_view name);
std::optional<Emotion> try_parse_emotion(std::string_view name);

constexpr std::size_t index(Intention label) { return static_cast<std::size_t>(label); }
constexpr std::size_t index(Emotion label) { return static_cast<std::size_t>(label); }

// request, suggest and command open an intention that a later turn can satisfy.
constexpr bool is_directive(Intention label) {
  return label == Intention::request || label == Intention::suggest || label == Intention::command;
}

}  // namespace rain
