#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "rain/diff/params.hpp"
#include "rain/errors.hpp"

namespace rain::diff {

struct GradCheckOptions {
  double eps = 1e-4;
  // Parameters with more entries than this are checked on a seeded sample.
  std::size_t full_check_limit = 4096;
  std::size_t sample_size = 256;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
};

template <typename T>
T relative_error(T analytic, T numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), static_cast<T>(1e-8)});
}

// `loss(true)` must evaluate the loss and run backward (accumulating into the
// store's grads); `loss(false)` only evaluates. Compares every analytic entry
// against the central difference (f(x+eps) - f(x-eps)) / 2eps.
template <typename T>
GradCheckResult grad_check(ParameterStore<T>& store, const std::function<T(bool)>& loss,
                           const GradCheckOptions& options = {}) {
  auto checked_loss = [&](bool backward) {
    const T v = loss(backward);
    if (!std::isfinite(v)) throw NonFiniteError("grad_check: non-finite loss");
    return v;
  };
  store.zero_grad();
  checked_loss(true);

  GradCheckResult result;
  std::mt19937_64 rng(options.seed);
  for (std::size_t p = 0; p < store.size(); ++p) {
    auto& param = store[p];
    const std::vector<T> analytic = param.grad;
    std::vector<std::size_t> entries(param.size());
    std::iota(entries.begin(), entries.end(), std::size_t{0});
    if (entries.size() > options.full_check_limit) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(options.sample_size);
      std::sort(entries.begin(), entries.end());
    }
    for (const auto k : entries) {
      const T saved = param.value[k];
      const T eps = static_cast<T>(options.eps);
      param.value[k] = saved + eps;
      const T up = checked_loss(false);
      param.value[k] = saved - eps;
      const T down = checked_loss(false);
      param.value[k] = saved;
      const T numeric = (up - down) / (T{2} * eps);
      const double err = static_cast<double>(relative_error(analytic[k], numeric));
      ++result.entries_checked;
      if (result.entries_checked == 1 || err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_param = param.name;
        result.worst_index = k;
        result.worst_analytic = static_cast<double>(analytic[k]);
        result.worst_numeric = static_cast<double>(numeric);
      }
    }
  }
  return result;
}

}  // namespace rain::diff
