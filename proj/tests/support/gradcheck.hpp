#pragma once

// Central-difference gradient checking in double precision, shared by the
// unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "nerfsteg/ops.hpp"
#include "nerfsteg/tensor.hpp"
#include "nerfsteg/volume_renderer.hpp"

namespace nerfsteg::testing {

using ScalarFn = std::function<Tensor64(const std::vector<Tensor64>&)>;

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
};

/// Worst |analytic - numeric| / max(1, |analytic|, |numeric|) over every
/// element of every input.
inline GradCheckResult gradcheck(const ScalarFn& f, std::vector<Tensor64> inputs, double h = 1e-3) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  backward(f(inputs));
  GradCheckResult res;
  for (auto& t : inputs) {
    std::vector<double> analytic(t.numel(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double orig = t[i];
      double plus, minus;
      {
        NoGradGuard ng;
        t[i] = orig + h;
        plus = f(inputs).item();
        t[i] = orig - h;
        minus = f(inputs).item();
      }
      t[i] = orig;
      const double numeric = (plus - minus) / (2.0 * h);
      const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
      res.max_rel_err = std::max(res.max_rel_err, std::abs(analytic[i] - numeric) / denom);
      ++res.checked;
    }
  }
  return res;
}

inline Tensor64 random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  return Tensor64::uniform(std::move(shape), lo, hi, rng);
}

/// Values bounded away from zero by `margin`, so relu kinks are never crossed.
inline Tensor64 away_from_zero(Shape shape, Rng& rng, double margin = 0.05) {
  Tensor64 t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) {
    const double mag = rng.uniform(margin, 1.0);
    t[i] = rng.uniform() < 0.5 ? -mag : mag;
  }
  return t;
}

/// Distinct values with pairwise gaps well above the finite-difference step,
/// so a max-pool argmax never changes under perturbation.
inline Tensor64 distinct_values(Shape shape, Rng& rng) {
  Tensor64 t(std::move(shape));
  std::vector<std::size_t> order(t.numel());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  for (std::size_t i = 0; i < order.size(); ++i) t[order[i]] = 0.1 * static_cast<double>(i) - 1.0;
  return t;
}

/// Reduces an arbitrary tensor to a scalar through fixed random weights so
/// every output element contributes a distinct coefficient.
inline Tensor64 project(const Tensor64& y, std::uint64_t seed) {
  Rng rng(seed);
  const Tensor64 w = Tensor64::uniform(y.shape(), -1.0, 1.0, rng);
  return sum(mul(y, w));
}

struct NamedCheck {
  std::string name;
  ScalarFn fn;
  std::vector<Tensor64> inputs;
};

/// One check per primitive for the given seed.
inline std::vector<NamedCheck> primitive_checks(std::uint64_t seed) {
  Rng rng(seed);
  const std::uint64_t ps = seed * 7919 + 1;
  std::vector<NamedCheck> c;
  c.push_back({"add", [ps](const auto& in) { return project(add(in[0], in[1]), ps); },
               {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)}});
  c.push_back({"sub", [ps](const auto& in) { return project(sub(in[0], in[1]), ps); },
               {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)}});
  c.push_back({"mul", [ps](const auto& in) { return project(mul(in[0], in[1]), ps); },
               {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)}});
  c.push_back({"scale", [ps](const auto& in) { return project(scale(in[0], -1.7), ps); }, {random_tensor({5}, rng)}});
  c.push_back({"relu", [ps](const auto& in) { return project(relu(in[0]), ps); }, {away_from_zero({3, 4}, rng)}});
  c.push_back(
      {"sigmoid", [ps](const auto& in) { return project(sigmoid(in[0]), ps); }, {random_tensor({3, 4}, rng, -4, 4)}});
  c.push_back({"sum", [](const auto& in) { return sum(in[0]); }, {random_tensor({4}, rng)}});
  c.push_back({"mean", [](const auto& in) { return mean(in[0]); }, {random_tensor({2, 2}, rng)}});
  c.push_back({"reshape", [ps](const auto& in) { return project(reshape(in[0], Shape{3, 2}), ps); },
               {random_tensor({2, 3}, rng)}});
  c.push_back({"concat_cols", [ps](const auto& in) { return project(concat_cols(in[0], in[1]), ps); },
               {random_tensor({3, 2}, rng), random_tensor({3, 4}, rng)}});
  c.push_back({"affine", [ps](const auto& in) { return project(affine(in[0], in[1], in[2]), ps); },
               {random_tensor({6}, rng), random_tensor({4, 6}, rng), random_tensor({4}, rng)}});
  c.push_back({"linear", [ps](const auto& in) { return project(linear(in[0], in[1], in[2]), ps); },
               {random_tensor({3, 5}, rng), random_tensor({4, 5}, rng), random_tensor({4}, rng)}});
  c.push_back({"conv2d", [ps](const auto& in) { return project(conv2d(in[0], in[1], in[2], 1, 0), ps); },
               {random_tensor({2, 6, 6}, rng), random_tensor({3, 2, 3, 3}, rng), random_tensor({3}, rng)}});
  c.push_back({"conv2d_strided_padded",
               [ps](const auto& in) { return project(conv2d(in[0], in[1], in[2], 2, 1), ps); },
               {random_tensor({2, 5, 5}, rng), random_tensor({2, 2, 3, 3}, rng), random_tensor({2}, rng)}});
  c.push_back({"maxpool2d", [ps](const auto& in) { return project(maxpool2d(in[0], 2, 2), ps); },
               {distinct_values({2, 5, 5}, rng)}});
  c.push_back({"mse_loss", [](const auto& in) { return mse_loss(in[0], in[1]); },
               {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)}});

  // Two rays of four sorted samples each.
  constexpr std::size_t kRays = 2, kSamples = 4;
  std::vector<double> ts, t_far;
  for (std::size_t r = 0; r < kRays; ++r) {
    double t = 2.0;
    for (std::size_t s = 0; s < kSamples; ++s) {
      t += rng.uniform(0.2, 0.8);
      ts.push_back(t);
    }
    t_far.push_back(t + 0.5);
  }
  const Color bg{0.9f, 0.6f, 0.3f};
  c.push_back({"composite_rays",
               [ps, ts, t_far, bg](const auto& in) {
                 return project(composite_rays(in[0], in[1], ts, t_far, kSamples, bg), ps);
               },
               {random_tensor({kRays * kSamples, 1}, rng, 0.1, 2.0),
                random_tensor({kRays * kSamples, 3}, rng, 0.0, 1.0)}});
  return c;
}

}  // namespace nerfsteg::testing
