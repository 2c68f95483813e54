#pragma once

#include <string>

#include "rain/diff/params.hpp"
#include "rain/diff/tape.hpp"

namespace rain::diff {

// Each gate reads [x; h_prev] through its own (input + hidden) x hidden matrix.
template <class T>
struct LstmParams {
  std::size_t input = 0;
  std::size_t hidden = 0;
  ParamTensor<T>* w_i = nullptr;
  ParamTensor<T>* w_f = nullptr;
  ParamTensor<T>* w_o = nullptr;
  ParamTensor<T>* w_g = nullptr;
  ParamTensor<T>* b_i = nullptr;
  ParamTensor<T>* b_f = nullptr;
  ParamTensor<T>* b_o = nullptr;
  ParamTensor<T>* b_g = nullptr;

  static LstmParams create(ParameterStore<T>& store, const std::string& prefix, std::size_t input,
                           std::size_t hidden) {
    LstmParams p;
    p.input = input;
    p.hidden = hidden;
    p.w_i = &store.add(prefix + ".W_i", input + hidden, hidden, Init::xavier_uniform);
    p.w_f = &store.add(prefix + ".W_f", input + hidden, hidden, Init::xavier_uniform);
    p.w_o = &store.add(prefix + ".W_o", input + hidden, hidden, Init::xavier_uniform);
    p.w_g = &store.add(prefix + ".W_g", input + hidden, hidden, Init::xavier_uniform);
    p.b_i = &store.add(prefix + ".b_i", 1, hidden, Init::zeros);
    p.b_f = &store.add(prefix + ".b_f", 1, hidden, Init::zeros);
    p.b_o = &store.add(prefix + ".b_o", 1, hidden, Init::zeros);
    p.b_g = &store.add(prefix + ".b_g", 1, hidden, Init::zeros);
    return p;
  }
};

template <class T>
struct LstmState {
  Var<T> h;
  Var<T> c;
};

template <class T>
LstmState<T> lstm_zero_state(Tape<T>& tape, std::size_t hidden) {
  return {tape.zeros(hidden), tape.zeros(hidden)};
}

// i, f, o = sigmoid gates; g = tanh candidate; c = f*c_prev + i*g; h = o*tanh(c).
template <class T>
LstmState<T> lstm_cell(Var<T> x, LstmState<T> prev, const LstmParams<T>& p) {
  auto& tape = *x.tape;
  if (x.size() != p.input || prev.h.size() != p.hidden || prev.c.size() != p.hidden) {
    throw DimensionError("lstm_cell: x has " + std::to_string(x.size()) + " (expected " +
                         std::to_string(p.input) + "), state has " + std::to_string(prev.h.size()) +
                         "/" + std::to_string(prev.c.size()) + " (expected " + std::to_string(p.hidden) + ")");
  }
  auto xh = concat({x, prev.h});
  auto i = sigmoid(affine(xh, tape.param(*p.w_i), tape.param(*p.b_i)));
  auto f = sigmoid(affine(xh, tape.param(*p.w_f), tape.param(*p.b_f)));
  auto o = sigmoid(affine(xh, tape.param(*p.w_o), tape.param(*p.b_o)));
  auto g = tanh(affine(xh, tape.param(*p.w_g), tape.param(*p.b_g)));
  auto c = add(mul(f, prev.c), mul(i, g));
  auto h = mul(o, tanh(c));
  return {h, c};
}

template <class T>
struct GruParams {
  std::size_t input = 0;
  std::size_t hidden = 0;
  ParamTensor<T>* w_z = nullptr;
  ParamTensor<T>* w_r = nullptr;
  ParamTensor<T>* w_n = nullptr;
  ParamTensor<T>* b_z = nullptr;
  ParamTensor<T>* b_r = nullptr;
  ParamTensor<T>* b_n = nullptr;

  static GruParams create(ParameterStore<T>& store, const std::string& prefix, std::size_t input,
                          std::size_t hidden) {
    GruParams p;
    p.input = input;
    p.hidden = hidden;
    p.w_z = &store.add(prefix + ".W_z", input + hidden, hidden, Init::xavier_uniform);
    p.w_r = &store.add(prefix + ".W_r", input + hidden, hidden, Init::xavier_uniform);
    p.w_n = &store.add(prefix + ".W_n", input + hidden, hidden, Init::xavier_uniform);
    p.b_z = &store.add(prefix + ".b_z", 1, hidden, Init::zeros);
    p.b_r = &store.add(prefix + ".b_r", 1, hidden, Init::zeros);
    p.b_n = &store.add(prefix + ".b_n", 1, hidden, Init::zeros);
    return p;
  }
};

// z = sigmoid(W_z[x;h] + b_z), r = sigmoid(W_r[x;h] + b_r),
// n = tanh(W_n[x; r*h] + b_n), h' = (1 - z)*h + z*n.
// An update gate of 0 keeps the previous state.
template <class T>
Var<T> gru_cell(Var<T> x, Var<T> h_prev, const GruParams<T>& p) {
  auto& tape = *x.tape;
  if (x.size() != p.input || h_prev.size() != p.hidden) {
    throw DimensionError("gru_cell: x has " + std::to_string(x.size()) + " (expected " +
                         std::to_string(p.input) + "), state has " + std::to_string(h_prev.size()) +
                         " (expected " + std::to_string(p.hidden) + ")");
  }
  auto xh = concat({x, h_prev});
  auto z = sigmoid(affine(xh, tape.param(*p.w_z), tape.param(*p.b_z)));
  auto r = sigmoid(affine(xh, tape.param(*p.w_r), tape.param(*p.b_r)));
  auto xrh = concat({x, mul(r, h_prev)});
  auto n = tanh(affine(xrh, tape.param(*p.w_n), tape.param(*p.b_n)));
  return add(h_prev, mul(z, sub(n, h_prev)));
}

}  // namespace rain::diff
