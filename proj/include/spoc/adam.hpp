#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace spoc::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment estimates for a fixed list of parameter tensors, each viewed as a
/// flat array. Sizes are taken from the first step; later steps must match.
struct AdamState {
  AdamConfig config;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t t = 0;
};

/// One bias-corrected Adam update of every tensor in `params`, in place.
/// Throws Error(kDimensionMismatch) when sizes disagree.
void adam_step(AdamState& state, std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads);

}  // namespace spoc::nn
