#include "nerfsteg/adam.hpp"

#include <cmath>
#include <string>

namespace nerfsteg {

template <typename T>
void adam_step(std::vector<BasicTensor<T>>& params, AdamState<T>& state) {
  const auto& opt = state.options;
  if (!(opt.lr > 0.0) || opt.beta1 < 0.0 || opt.beta1 >= 1.0 || opt.beta2 < 0.0 || opt.beta2 >= 1.0)
    throw std::invalid_argument("adam: require lr > 0 and 0 <= beta1, beta2 < 1");

  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].numel(), T(0));
      state.v[i].assign(params[i].numel(), T(0));
    }
  }
  if (state.m.size() != params.size()) throw DimensionError("adam: state does not match parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i].numel() || state.v[i].size() != params[i].numel())
      throw DimensionError("adam: moment buffer " + std::to_string(i) + " does not match parameter shape");
    for (T g : params[i].grad())
      if (!std::isfinite(g))
        throw NumericError("adam: non-finite gradient in parameter " + std::to_string(i) + ", step rejected");
  }

  state.t += 1;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.t));
  const T b1 = static_cast<T>(opt.beta1), b2 = static_cast<T>(opt.beta2);
  const T step = static_cast<T>(opt.lr / bc1);
  const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
  const T eps = static_cast<T>(opt.eps);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    auto g = params[i].grad();
    const bool has_grad = !g.empty();
    T* m = state.m[i].data();
    T* v = state.v[i].data();
    const std::size_t n = p.size();
    for (std::size_t j = 0; j < n; ++j) {
      const T gj = has_grad ? g[j] : T(0);
      m[j] = b1 * m[j] + (T(1) - b1) * gj;
      v[j] = b2 * v[j] + (T(1) - b2) * gj * gj;
      p[j] -= step * m[j] / (std::sqrt(v[j]) * inv_sqrt_bc2 + eps);
    }
  }
}

template <typename T>
BasicAdam<T>::BasicAdam(std::vector<BasicTensor<T>> params, AdamOptions options) : params_(std::move(params)) {
  state_.options = options;
}

template <typename T>
void BasicAdam<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template void adam_step(std::vector<BasicTensor<float>>&, AdamState<float>&);
template void adam_step(std::vector<BasicTensor<double>>&, AdamState<double>&);
template class BasicAdam<float>;
template class BasicAdam<double>;

}  // namespace nerfsteg
