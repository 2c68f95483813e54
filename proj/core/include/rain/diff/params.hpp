#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rain/errors.hpp"

namespace rain::diff {

enum class Init { xavier_uniform, zeros };

// A named trainable array, row-major rows x cols. Vectors are 1 x n.
template <class T>
struct ParamTensor {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> value;
  std::vector<T> grad;

  std::size_t size() const { return value.size(); }
  T& at(std::size_t r, std::size_t c) { return value[r * cols + c]; }
  T at(std::size_t r, std::size_t c) const { return value[r * cols + c]; }
};

// Ordered name -> ParamTensor map. Addresses are stable for the store's
// lifetime, so tapes may hold raw pointers into it.
template <class T>
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed = 0) : seed_(seed), rng_(seed) {}

  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) noexcept = default;
  ParameterStore& operator=(ParameterStore&&) noexcept = default;

  // Draws are made in double from a single stream in registration order, so
  // float and double stores built from the same seed hold the same values
  // (to float precision).
  ParamTensor<T>& add(const std::string& name, std::size_t rows, std::size_t cols, Init init) {
    if (rows == 0 || cols == 0) throw DimensionError("parameter '" + name + "' has an empty shape");
    if (index_.count(name)) throw Error("duplicate parameter name '" + name + "'");
    auto p = std::make_unique<ParamTensor<T>>();
    p->name = name;
    p->rows = rows;
    p->cols = cols;
    p->value.assign(rows * cols, T(0));
    p->grad.assign(rows * cols, T(0));
    if (init == Init::xavier_uniform) {
      const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : p->value) v = static_cast<T>(dist(rng_));
    }
    index_.emplace(name, params_.size());
    params_.push_back(std::move(p));
    return *params_.back();
  }

  ParamTensor<T>& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("unknown parameter '" + name + "'");
    return *params_[it->second];
  }
  const ParamTensor<T>& get(const std::string& name) const {
    return const_cast<ParameterStore*>(this)->get(name);
  }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const { return params_.size(); }
  ParamTensor<T>& operator[](std::size_t i) { return *params_[i]; }
  const ParamTensor<T>& operator[](std::size_t i) const { return *params_[i]; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) std::fill(p->grad.begin(), p->grad.end(), T(0));
  }

  std::uint64_t seed() const { return seed_; }

  // Copies values from another store with identical names and shapes.
  template <class U>
  void copy_values_from(const ParameterStore<U>& other) {
    if (other.size() != size()) throw Error("parameter stores differ in size");
    for (std::size_t i = 0; i < size(); ++i) {
      auto& dst = *params_[i];
      const auto& src = other[i];
      if (dst.name != src.name || dst.rows != src.rows || dst.cols != src.cols) {
        throw Error("parameter mismatch at '" + dst.name + "'");
      }
      for (std::size_t k = 0; k < dst.size(); ++k) dst.value[k] = static_cast<T>(src.value[k]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  std::vector<std::unique_ptr<ParamTensor<T>>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace rain::diff
