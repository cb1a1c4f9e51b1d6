#pragma once

// Shared test helpers: random tensors from the project RNG and the central
// finite-difference gradient oracle. The oracle only perturbs leaf storage
// and re-runs the forward closure, so it stays independent of the autodiff
// path it checks.

#include <cmath>
#include <functional>
#include <vector>

#include "mufen/nn.hpp"
#include "mufen/rng.hpp"
#include "mufen/tensor.hpp"

namespace mufen::testing {

inline Tensor rand_tensor(const Shape& shape, Rng& rng, double lo = -1.0,
                          double hi = 1.0, bool requires_grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from_data(shape, std::move(v), requires_grad);
}

inline Tensor randn_tensor(const Shape& shape, Rng& rng, bool requires_grad = false) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.normal();
  return Tensor::from_data(shape, std::move(v), requires_grad);
}

// Random values kept away from zero, for ops with kinks (relu, l1).
inline Tensor rand_tensor_away_from(const Shape& shape, Rng& rng, double margin) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) {
    const double mag = margin + rng.uniform(0.0, 1.0);
    x = rng.uniform() < 0.5 ? -mag : mag;
  }
  return Tensor::from_data(shape, std::move(v), true);
}

inline double grad_rel_err(double analytic, double numeric) {
  const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

// Worst relative error between backward() gradients and central differences
// over sampled components of each leaf. `fn` rebuilds the graph from the
// same leaves on every call.
inline double max_gradcheck_err(const std::function<Tensor()>& fn,
                                std::vector<Tensor> leaves,
                                std::size_t samples_per_leaf, std::uint64_t seed,
                                double h = 1e-4) {
  for (Tensor& leaf : leaves) leaf.zero_grad();
  backward(fn());
  std::vector<std::vector<double>> analytic;
  analytic.reserve(leaves.size());
  for (const Tensor& leaf : leaves) analytic.push_back(leaf.grad());

  double worst = 0.0;
  Rng rng(seed);
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    Tensor& leaf = leaves[li];
    const std::size_t n = leaf.numel();
    const std::size_t count = std::min(samples_per_leaf, n);
    const auto indices = rng.sample_without_replacement(n, count);
    for (const std::size_t idx : indices) {
      auto& vals = leaf.leaf_values();
      const double orig = vals[idx];
      vals[idx] = orig + h;
      const double fp = fn().item();
      vals[idx] = orig - h;
      const double fm = fn().item();
      vals[idx] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[li].empty() ? 0.0 : analytic[li][idx];
      worst = std::max(worst, grad_rel_err(a, numeric));
    }
  }
  return worst;
}

// Gradient check over every parameter of a store plus optional extra leaves.
inline double max_gradcheck_err_params(const std::function<Tensor()>& fn,
                                       ParamStore& params,
                                       std::vector<Tensor> extra_leaves,
                                       std::size_t samples_per_leaf,
                                       std::uint64_t seed, double h = 1e-4) {
  std::vector<Tensor> leaves = std::move(extra_leaves);
  for (const auto& [name, tensor] : params.items()) leaves.push_back(tensor);
  return max_gradcheck_err(fn, std::move(leaves), samples_per_leaf, seed, h);
}

}  // namespace mufen::testing
