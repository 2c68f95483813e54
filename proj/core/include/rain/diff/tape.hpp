#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rain/diff/params.hpp"
#include "rain/errors.hpp"

namespace rain::diff {

template <class T>
class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  std::uint32_t id = 0;

  std::span<const T> value() const { return tape->value(*this); }
  std::span<T> grad() const { return tape->grad(*this); }
  std::size_t size() const { return tape->size(*this); }
  std::size_t rows() const { return tape->rows(*this); }
  std::size_t cols() const { return tape->cols(*this); }
  T scalar() const { return value()[0]; }
};

inline std::string shape_string(std::size_t rows, std::size_t cols) {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

// Records one forward pass. Nodes are appended in evaluation order, which is
// a topological order, so backward() walks the node list in reverse and
// visits each node exactly once. Gradients accumulate additively at fan-out.
// Parameter leaves alias the ParamTensor buffers: their gradient lands
// directly in ParamTensor::grad.
template <class T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::uint32_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(std::vector<T> values) {
    const std::size_t n = values.size();
    return record("constant", std::move(values), 1, n, nullptr);
  }
  Var<T> constant(std::vector<T> values, std::size_t rows, std::size_t cols) {
    if (rows * cols != values.size()) throw DimensionError("constant: size does not match shape");
    return record("constant", std::move(values), rows, cols, nullptr);
  }
  Var<T> zeros(std::size_t n) { return constant(std::vector<T>(n, T(0))); }

  // One node per parameter per tape.
  Var<T> param(ParamTensor<T>& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return {this, it->second};
    Node node;
    node.op = "param";
    node.rows = p.rows;
    node.cols = p.cols;
    node.param = &p;
    nodes_.push_back(std::move(node));
    auto id = static_cast<std::uint32_t>(nodes_.size() - 1);
    param_nodes_.emplace(&p, id);
    return {this, id};
  }

  // Appends a computed node. Any NaN/Inf in `value` aborts with the op name.
  Var<T> record(const char* op, std::vector<T> value, std::size_t rows, std::size_t cols,
                BackwardFn backward) {
    for (const T v : value) {
      if (!std::isfinite(v)) throw NonFiniteError(std::string("non-finite value produced by ") + op);
    }
    Node node;
    node.op = op;
    node.rows = rows;
    node.cols = cols;
    node.grad.assign(value.size(), T(0));
    node.value = std::move(value);
    node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  std::span<const T> value(Var<T> v) const {
    const auto& n = nodes_.at(v.id);
    return n.param ? std::span<const T>(n.param->value) : std::span<const T>(n.value);
  }
  std::span<T> grad(Var<T> v) {
    auto& n = nodes_.at(v.id);
    return n.param ? std::span<T>(n.param->grad) : std::span<T>(n.grad);
  }
  std::size_t rows(Var<T> v) const { return nodes_.at(v.id).rows; }
  std::size_t cols(Var<T> v) const { return nodes_.at(v.id).cols; }
  std::size_t size(Var<T> v) const { return rows(v) * cols(v); }
  const char* op(Var<T> v) const { return nodes_.at(v.id).op; }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t backward_visits() const { return visits_; }

  // Seeds d(root)/d(root) = seed (root must be a scalar) and propagates.
  void backward(Var<T> root, T seed = T(1)) {
    if (root.tape != this) throw Error("backward: variable belongs to another tape");
    if (size(root) != 1) throw DimensionError("backward: root must be a scalar, got " +
                                              shape_string(rows(root), cols(root)));
    if (backward_done_) throw Error("backward: tape already consumed");
    backward_done_ = true;
    grad(root)[0] += seed;
    for (std::uint32_t i = root.id + 1; i-- > 0;) {
      ++visits_;
      auto& n = nodes_[i];
      if (n.backward) n.backward(*this, i);
    }
  }

 private:
  struct Node {
    const char* op = "";
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> value;
    std::vector<T> grad;
    ParamTensor<T>* param = nullptr;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const ParamTensor<T>*, std::uint32_t> param_nodes_;
  std::size_t visits_ = 0;
  bool backward_done_ = false;
};

namespace detail {

template <class T>
Tape<T>& same_tape(Var<T> a, Var<T> b) {
  if (a.tape == nullptr || a.tape != b.tape) throw Error("operands belong to different tapes");
  return *a.tape;
}

template <class T>
void require_same_shape(const char* op, Var<T> a, Var<T> b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.rows(), a.cols()) +
                         " vs " + shape_string(b.rows(), b.cols()));
  }
}

template <class T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace detail

// y = W^T x + b. x is rows x in (each row transformed), W is in x out, b is 1 x out.
template <class T>
Var<T> affine(Var<T> x, Var<T> W, Var<T> b) {
  auto& tape = detail::same_tape(x, W);
  detail::same_tape(x, b);
  const std::size_t n = x.rows(), in = x.cols(), out = W.cols();
  if (W.rows() != in || b.rows() != 1 || b.cols() != out) {
    throw DimensionError("affine: x" + shape_string(n, in) + " W" + shape_string(W.rows(), W.cols()) +
                         " b" + shape_string(b.rows(), b.cols()));
  }
  auto xv = x.value();
  auto wv = W.value();
  auto bv = b.value();
  std::vector<T> y(n * out);
  for (std::size_t r = 0; r < n; ++r) {
    T* yr = y.data() + r * out;
    std::copy(bv.begin(), bv.end(), yr);
    for (std::size_t i = 0; i < in; ++i) {
      const T xi = xv[r * in + i];
      if (xi == T(0)) continue;
      const T* wi = wv.data() + i * out;
      for (std::size_t j = 0; j < out; ++j) yr[j] += wi[j] * xi;
    }
  }
  const auto xid = x.id, wid = W.id, bid = b.id;
  return tape.record("affine", std::move(y), n, out, [=](Tape<T>& t, std::uint32_t self) {
    auto gy = t.grad({&t, self});
    auto xv = t.value({&t, xid});
    auto wv = t.value({&t, wid});
    auto gx = t.grad({&t, xid});
    auto gw = t.grad({&t, wid});
    auto gb = t.grad({&t, bid});
    for (std::size_t r = 0; r < n; ++r) {
      const T* gyr = gy.data() + r * out;
      for (std::size_t j = 0; j < out; ++j) gb[j] += gyr[j];
      for (std::size_t i = 0; i < in; ++i) {
        const T xi = xv[r * in + i];
        const T* wi = wv.data() + i * out;
        T* gwi = gw.data() + i * out;
        T acc = T(0);
        for (std::size_t j = 0; j < out; ++j) {
          acc += wi[j] * gyr[j];
          gwi[j] += xi * gyr[j];
        }
        gx[r * in + i] += acc;
      }
    }
  });
}

// y = W^T x, no bias.
template <class T>
Var<T> linear(Var<T> x, Var<T> W) {
  auto& tape = detail::same_tape(x, W);
  const std::size_t n = x.rows(), in = x.cols(), out = W.cols();
  if (W.rows() != in) {
    throw DimensionError("linear: x" + shape_string(n, in) + " W" + shape_string(W.rows(), W.cols()));
  }
  auto xv = x.value();
  auto wv = W.value();
  std::vector<T> y(n * out, T(0));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < in; ++i) {
      const T xi = xv[r * in + i];
      for (std::size_t j = 0; j < out; ++j) y[r * out + j] += wv[i * out + j] * xi;
    }
  }
  const auto xid = x.id, wid = W.id;
  return tape.record("linear", std::move(y), n, out, [=](Tape<T>& t, std::uint32_t self) {
    auto gy = t.grad({&t, self});
    auto xv = t.value({&t, xid});
    auto wv = t.value({&t, wid});
    auto gx = t.grad({&t, xid});
    auto gw = t.grad({&t, wid});
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t i = 0; i < in; ++i) {
        T acc = T(0);
        for (std::size_t j = 0; j < out; ++j) {
          acc += wv[i * out + j] * gy[r * out + j];
          gw[i * out + j] += xv[r * in + i] * gy[r * out + j];
        }
        gx[r * in + i] += acc;
      }
    }
  });
}

enum class Activation { relu, tanh, sigmoid };

template <class T>
Var<T> activation(Activation kind, Var<T> x) {
  auto& tape = *x.tape;
  auto xv = x.value();
  std::vector<T> y(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    switch (kind) {
      case Activation::relu: y[i] = xv[i] > T(0) ? xv[i] : T(0); break;
      case Activation::tanh: y[i] = std::tanh(xv[i]); break;
      case Activation::sigmoid: y[i] = detail::stable_sigmoid(xv[i]); break;
    }
  }
  const char* name = kind == Activation::relu ? "relu" : kind == Activation::tanh ? "tanh" : "sigmoid";
  const auto xid = x.id;
  return tape.record(name, std::move(y), x.rows(), x.cols(), [=](Tape<T>& t, std::uint32_t self) {
    auto gy = t.grad({&t, self});
    auto yv = t.value({&t, self});
    auto xv = t.value({&t, xid});
    auto gx = t.grad({&t, xid});
    for (std::size_t i = 0; i < gy.size(); ++i) {
      switch (kind) {
        case Activation::relu: gx[i] += xv[i] > T(0) ? gy[i] : T(0); break;
        case Activation::tanh: gx[i] += gy[i] * (T(1) - yv[i] * yv[i]); break;
        case Activation::sigmoid: gx[i] += gy[i] * yv[i] * (T(1) - yv[i]); break;
      }
    }
  });
}

template <class T> Var<T> relu(Var<T> x) { return activation(Activation::relu, x); }
template <class T> Var<T> tanh(Var<T> x) { return activation(Activation::tanh, x); }
template <class T> Var<T> sigmoid(Var<T> x) { return activation(Activation::sigmoid, x); }

enum class Elementwise { add, sub, mul };

template <class T>
Var<T> elementwise(Elementwise kind, Var<T> a, Var<T> b) {
  auto& tape = detail::same_tape(a, b);
  const char* name = kind == Elementwise::add ? "add" : kind == Elementwise::sub ? "sub" : "mul";
  detail::require_same_shape(name, a, b);
  auto av = a.value();
  auto bv = b.value();
  std::vector<T> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    switch (kind) {
      case Elementwise::add: y[i] = av[i] + bv[i]; break;
      case Elementwise::sub: y[i] = av[i] - bv[i]; break;
      case Elementwise::mul: y[i] = av[i] * bv[i]; break;
    }
  }
  const auto aid = a.id, bid = b.id;
  return tape.record(name, std::move(y), a.rows(), a.cols(), [=](Tape<T>& t, std::uint32_t self) {
    auto gy = t.grad({&t, self});
    // a and b may be the same node; read values before accumulating.
    auto av = t.value({&t, aid});
    auto bv = t.value({&t, bid});
    for (std::size_t i = 0; i < gy.size(); ++i) {
      T da = gy[i], db = gy[i];
      if (kind == Elementwise::sub) db = -gy[i];
      if (kind == Elementwise::mul) {
        da = gy[i] * bv[i];
        db = gy[i] * av[i];
      }
      t.grad({&t, aid})[i] += da;
      t.grad({&t, bid})[i] += db;
    }
  });
}

template <class T> Var<T> add(Var<T> a, Var<T> b) { return elementwise(Elementwise::add, a, b); }
template <class T> Var<T> sub(Var<T> a, Var<T> b) { return elementwise(Elementwise::sub, a, b); }
template <class T> Var<T> mul(Var<T> a, Var<T> b) { return elementwise(Elementwise::mul, a, b); }

// Flattens and joins the parts into one 1 x total vector.
template <class T>
Var<T> concat(std::span<const Var<T>> parts) {
  if (parts.empty()) throw DimensionError("concat: no parts");
  auto& tape = *parts.front().tape;
  std::vector<T> y;
  std::vector<std::pair<std::uint32_t, std::size_t>> layout;
  for (const auto& p : parts) {
    if (p.tape != &tape) throw Error("concat: parts belong to different tapes");
    auto v = p.value();
    layout.emplace_back(p.id, y.size());
    y.insert(y.end(), v.begin(), v.end());
  }
  const std::size_t total = y.size();
  return tape.record("concat", std::move(y), 1, total, [layout](Tape<T>& t, std::uint32_t self) {
    auto gy = t.grad({&t, self});
    for (const auto& [id, offset] : layout) {
      auto gp = t.grad({&t, id});
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += gy[offset + i];
    }
  });
}

template <class T>
Var<T> concat(std::initializer_list<Var<T>> parts) {
  return concat(std::span<const Var<T>>(parts.begin(), parts.size()));
}

template <class T>
Var<T> scale(Var<T> x, T factor) {
  auto xv = x.value();
  std::vector<T> y(xv.begin(), xv.end());
  for (auto& v : y) v *= factor;
  const auto xid = x.id;
  return x.tape->record("scale", std::move(y), x.rows(), x.cols(), [=](Tape<T>& t, std::uint32_t self) {
    auto gy = t.grad({&t, self});
    auto gx = t.grad({&t, xid});
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += factor * gy[i];
  });
}

// Elementwise sum of equally shaped operands.
template <class T>
Var<T> sum(std::span<const Var<T>> parts) {
  if (parts.empty()) throw DimensionError("sum: no operands");
  auto& tape = *parts.front().tape;
  std::vector<T> y(parts.front().size(), T(0));
  std::vector<std::uint32_t> ids;
  for (const auto& p : parts) {
    detail::require_same_shape("sum", parts.front(), p);
    auto v = p.value();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += v[i];
    ids.push_back(p.id);
  }
  return tape.record("sum", std::move(y), parts.front().rows(), parts.front().cols(),
                     [ids](Tape<T>& t, std::uint32_t self) {
                       auto gy = t.grad({&t, self});
                       for (auto id : ids) {
                         auto g = t.grad({&t, id});
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i];
                       }
                     });
}

template <class T>
Var<T> mean(std::span<const Var<T>> parts) {
  return scale(sum(parts), T(1) / static_cast<T>(parts.size()));
}

template <class T>
Var<T> dot(Var<T> a, Var<T> b) {
  auto& tape = detail::same_tape(a, b);
  if (a.size() != b.size()) {
    throw DimensionError("dot: sizes " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  auto av = a.value();
  auto bv = b.value();
  T acc = T(0);
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  const auto aid = a.id, bid = b.id;
  return tape.record("dot", {acc}, 1, 1, [=](Tape<T>& t, std::uint32_t self) {
    const T g = t.grad({&t, self})[0];
    auto av = t.value({&t, aid});
    auto bv = t.value({&t, bid});
    for (std::size_t i = 0; i < av.size(); ++i) {
      const T da = g * bv[i], db = g * av[i];
      t.grad({&t, aid})[i] += da;
      t.grad({&t, bid})[i] += db;
    }
  });
}

template <class T>
std::vector<T> softmax_values(std::span<const T> logits) {
  std::vector<T> p(logits.begin(), logits.end());
  const T m = *std::max_element(p.begin(), p.end());
  T z = T(0);
  for (auto& v : p) {
    v = std::exp(v - m);
    z += v;
  }
  for (auto& v : p) v /= z;
  return p;
}

template <class T>
Var<T> softmax(Var<T> x) {
  if (x.size() == 0) throw DimensionError("softmax: empty input");
  auto y = softmax_values<T>(x.value());
  const auto xid = x.id;
  return x.tape->record("softmax", std::move(y), x.rows(), x.cols(), [=](Tape<T>& t, std::uint32_t self) {
    auto gy = t.grad({&t, self});
    auto yv = t.value({&t, self});
    auto gx = t.grad({&t, xid});
    T inner = T(0);
    for (std::size_t i = 0; i < gy.size(); ++i) inner += gy[i] * yv[i];
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += yv[i] * (gy[i] - inner);
  });
}

// sum_k weights[k] * vectors[k]; weights is a 1 x K vector.
template <class T>
Var<T> weighted_sum(Var<T> weights, std::span<const Var<T>> vectors) {
  if (vectors.empty() || weights.size() != vectors.size()) {
    throw DimensionError("weighted_sum: " + std::to_string(weights.size()) + " weights for " +
                         std::to_string(vectors.size()) + " vectors");
  }
  auto& tape = *weights.tape;
  auto wv = weights.value();
  std::vector<T> y(vectors.front().size(), T(0));
  std::vector<std::uint32_t> ids;
  for (std::size_t k = 0; k < vectors.size(); ++k) {
    detail::require_same_shape("weighted_sum", vectors.front(), vectors[k]);
    auto v = vectors[k].value();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += wv[k] * v[i];
    ids.push_back(vectors[k].id);
  }
  const auto wid = weights.id;
  return tape.record("weighted_sum", std::move(y), vectors.front().rows(), vectors.front().cols(),
                     [=](Tape<T>& t, std::uint32_t self) {
                       auto gy = t.grad({&t, self});
                       for (std::size_t k = 0; k < ids.size(); ++k) {
                         auto v = t.value({&t, ids[k]});
                         const T w = t.value({&t, wid})[k];
                         T acc = T(0);
                         for (std::size_t i = 0; i < gy.size(); ++i) {
                           acc += gy[i] * v[i];
                           t.grad({&t, ids[k]})[i] += w * gy[i];
                         }
                         t.grad({&t, wid})[k] += acc;
                       }
                     });
}

// Row `row` of an embedding table; backward scatters into that row only.
template <class T>
Var<T> embedding(Tape<T>& tape, ParamTensor<T>& table, std::int64_t row) {
  if (row < 0 || static_cast<std::size_t>(row) >= table.rows) {
    throw DimensionError("embedding: row " + std::to_string(row) + " outside table '" + table.name +
                         "' of " + std::to_string(table.rows) + " rows");
  }
  const std::size_t cols = table.cols;
  const std::size_t offset = static_cast<std::size_t>(row) * cols;
  std::vector<T> y(table.value.begin() + offset, table.value.begin() + offset + cols);
  ParamTensor<T>* p = &table;
  return tape.record("embedding", std::move(y), 1, cols, [=](Tape<T>& t, std::uint32_t self) {
    auto gy = t.grad({&t, self});
    for (std::size_t i = 0; i < cols; ++i) p->grad[offset + i] += gy[i];
  });
}

template <class T>
struct XentResult {
  Var<T> loss;
  std::vector<T> probs;
};

// Max-subtracted softmax and -log p[gold]; backward is probs - onehot(gold).
template <class T>
XentResult<T> softmax_xent(Var<T> logits, std::size_t gold) {
  const std::size_t n = logits.size();
  if (gold >= n) {
    throw DimensionError("softmax_xent: gold index " + std::to_string(gold) + " out of range for " +
                         std::to_string(n) + " classes");
  }
  auto lv = logits.value();
  for (const T v : lv) {
    if (!std::isfinite(v)) throw NonFiniteError("non-finite logit entering softmax_xent");
  }
  const T m = *std::max_element(lv.begin(), lv.end());
  T z = T(0);
  for (const T v : lv) z += std::exp(v - m);
  const T log_z = m + std::log(z);
  std::vector<T> probs(n);
  for (std::size_t i = 0; i < n; ++i) probs[i] = std::exp(lv[i] - log_z);
  const T loss = log_z - lv[gold];
  const auto lid = logits.id;
  auto node = logits.tape->record("softmax_xent", {loss}, 1, 1, [=](Tape<T>& t, std::uint32_t self) {
    const T g = t.grad({&t, self})[0];
    auto gl = t.grad({&t, lid});
    for (std::size_t i = 0; i < n; ++i) gl[i] += g * (probs[i] - (i == gold ? T(1) : T(0)));
  });
  return {node, std::move(probs)};
}

}  // namespace rain::diff
