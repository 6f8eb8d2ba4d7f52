#include "spoc/adam.hpp"

#include <cmath>
#include <string>

#include "spoc/error.hpp"

namespace spoc::nn {

void adam_step(AdamState& state, std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads) {
  if (params.size() != grads.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "adam_step: " + std::to_string(params.size()) + " parameters but " +
                                                   std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size()) {
      throw Error(ErrorCode::kDimensionMismatch, "adam_step: gradient " + std::to_string(i) + " size mismatch");
    }
  }
  if (state.m.empty()) {
    for (const auto& g : grads) {
      state.m.emplace_back(g.size(), 0.0);
      state.v.emplace_back(g.size(), 0.0);
    }
  } else if (state.m.size() != grads.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "adam_step: parameter list changed between steps");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (state.m[i].size() != grads[i].size()) {
      throw Error(ErrorCode::kDimensionMismatch, "adam_step: state size mismatch for tensor " + std::to_string(i));
    }
  }

  const auto& c = state.config;
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    const auto g = grads[i];
    const auto p = params[i];
    for (std::size_t k = 0; k < g.size(); ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      p[k] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

}  // namespace spoc::nn
