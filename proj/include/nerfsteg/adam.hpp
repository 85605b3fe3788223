#pragma once

#include <cstdint>
#include <vector>

#include "nerfsteg/tensor.hpp"

namespace nerfsteg {

struct AdamOptions {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  AdamOptions options;
  std::vector<std::vector<T>> m;  // first moments, one buffer per parameter
  std::vector<std::vector<T>> v;  // second moments
  std::int64_t t = 0;
};

/// One bias-corrected Adam update over `params`, reading each parameter's
/// accumulated grad (a parameter without a grad buffer counts as zero
/// gradient). Throws NumericError and leaves everything untouched if any
/// gradient is non-finite.
template <typename T>
void adam_step(std::vector<BasicTensor<T>>& params, AdamState<T>& state);

// Owns a parameter list and its Adam state.
template <typename T>
class BasicAdam {
 public:
  BasicAdam(std::vector<BasicTensor<T>> params, AdamOptions options);

  void step() { adam_step(params_, state_); }
  void zero_grad();

  const AdamState<T>& state() const { return state_; }
  const std::vector<BasicTensor<T>>& params() const { return params_; }

 private:
  std::vector<BasicTensor<T>> params_;
  AdamState<T> state_;
};

using Adam = BasicAdam<float>;

}  // namespace nerfsteg
