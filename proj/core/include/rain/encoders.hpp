#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rain/corpus.hpp"
#include "rain/diff/cells.hpp"
#include "rain/diff/params.hpp"
#include "rain/diff/tape.hpp"

namespace rain {

enum class EncoderKind { meanpool, gru, gru_attn };

std::string_view to_string(EncoderKind kind);
EncoderKind parse_encoder_kind(std::string_view name);

struct EncoderConfig {
  EncoderKind kind = EncoderKind::gru;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 32;
  std::size_t vocab_size = 0;
};

// Maps an utterance's token ids to a sentence vector in R^hidden_dim.
//   meanpool: tanh(W^T mean(embeddings) + b)
//   gru:      final hidden state of a unidirectional GRU
//   gru_attn: GRU states pooled by a learned query (scaled dot product),
//             followed by an affine map
// An empty utterance encodes to the zero vector.
template <class T>
class Encoder {
 public:
  Encoder(diff::ParameterStore<T>& store, const std::string& prefix, const EncoderConfig& config)
      : config_(config), prefix_(prefix) {
    if (config.embed_dim == 0 || config.hidden_dim == 0 || config.vocab_size == 0) {
      throw DimensionError("encoder '" + prefix + "': dimensions must be >= 1");
    }
    embed_ = &store.add(prefix + ".embed", config.vocab_size, config.embed_dim, diff::Init::xavier_uniform);
    switch (config.kind) {
      case EncoderKind::meanpool:
        w_out_ = &store.add(prefix + ".W_out", config.embed_dim, config.hidden_dim, diff::Init::xavier_uniform);
        b_out_ = &store.add(prefix + ".b_out", 1, config.hidden_dim, diff::Init::zeros);
        break;
      case EncoderKind::gru:
        gru_ = diff::GruParams<T>::create(store, prefix + ".gru", config.embed_dim, config.hidden_dim);
        break;
      case EncoderKind::gru_attn:
        gru_ = diff::GruParams<T>::create(store, prefix + ".gru", config.embed_dim, config.hidden_dim);
        query_ = &store.add(prefix + ".query", 1, config.hidden_dim, diff::Init::xavier_uniform);
        w_out_ = &store.add(prefix + ".W_out", config.hidden_dim, config.hidden_dim, diff::Init::xavier_uniform);
        b_out_ = &store.add(prefix + ".b_out", 1, config.hidden_dim, diff::Init::zeros);
        break;
    }
  }

  const EncoderConfig& config() const { return config_; }
  const std::string& prefix() const { return prefix_; }

  diff::Var<T> encode(diff::Tape<T>& tape, std::span<const TokenId> tokens) const {
    if (tokens.empty()) return tape.zeros(config_.hidden_dim);
    std::vector<diff::Var<T>> embedded;
    embedded.reserve(tokens.size());
    for (const auto id : tokens) {
      if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size) {
        throw DataError("token id " + std::to_string(id) + " >= vocab_size " + std::to_string(config_.vocab_size));
      }
      embedded.push_back(diff::embedding(tape, *embed_, id));
    }
    switch (config_.kind) {
      case EncoderKind::meanpool: {
        auto pooled = diff::mean<T>(embedded);
        return diff::tanh(diff::affine(pooled, tape.param(*w_out_), tape.param(*b_out_)));
      }
      case EncoderKind::gru:
        return run_gru(tape, embedded).back();
      case EncoderKind::gru_attn: {
        auto states = run_gru(tape, embedded);
        auto query = tape.param(*query_);
        const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(config_.hidden_dim));
        std::vector<diff::Var<T>> scores;
        scores.reserve(states.size());
        for (const auto& s : states) scores.push_back(diff::scale(diff::dot(query, s), inv_sqrt));
        auto weights = diff::softmax(diff::concat<T>(scores));
        auto pooled = diff::weighted_sum<T>(weights, states);
        return diff::affine(pooled, tape.param(*w_out_), tape.param(*b_out_));
      }
    }
    return tape.zeros(config_.hidden_dim);
  }

  diff::ParamTensor<T>& embedding_table() { return *embed_; }
  diff::ParamTensor<T>* query() { return query_; }

 private:
  std::vector<diff::Var<T>> run_gru(diff::Tape<T>& tape, const std::vector<diff::Var<T>>& embedded) const {
    std::vector<diff::Var<T>> states;
    states.reserve(embedded.size());
    auto h = tape.zeros(config_.hidden_dim);
    for (const auto& x : embedded) {
      h = diff::gru_cell(x, h, gru_);
      states.push_back(h);
    }
    return states;
  }

  EncoderConfig config_;
  std::string prefix_;
  diff::ParamTensor<T>* embed_ = nullptr;
  diff::ParamTensor<T>* w_out_ = nullptr;
  diff::ParamTensor<T>* b_out_ = nullptr;
  diff::ParamTensor<T>* query_ = nullptr;
  diff::GruParams<T> gru_;
};

}  // namespace rain
