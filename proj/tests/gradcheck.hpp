#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "spoc/network.hpp"

namespace gradcheck {

struct Result {
  double max_error = 0.0;
  std::size_t checked = 0;
};

// Random parameters (BN gamma/beta included), random batch, cross-entropy
// loss; compares Network::backward against central differences.
inline Result check_network(const spoc::nn::NetworkSpec& spec, std::size_t batch, std::uint64_t seed) {
  using namespace spoc;
  auto net = nn::Network::xavier_init(spec, seed);
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  std::normal_distribution<double> normal(0, 1);
  for (auto p : net.parameters()) {
    for (auto& v : p) v += 0.3 * normal(rng);
  }
  Matrix x(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(spec.input_dim));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  std::uniform_int_distribution<int> label(0, static_cast<int>(spec.num_classes) - 1);
  std::vector<int> y(batch);
  for (auto& v : y) v = label(rng);

  const auto params = net.parameters();
  nn::ForwardCache cache;
  const Matrix logits = net.forward_train(x, cache, false);
  const auto grads = net.backward(cache, nn::softmax_cross_entropy(logits, y).grad);

  auto loss = [&] {
    nn::ForwardCache c;
    return nn::softmax_cross_entropy(net.forward_train(x, c, false), y).loss;
  };
  Result r;
  for (std::size_t t = 0; t < params.size(); ++t) {
    const auto numeric = oracle::numeric_gradient(params[t], loss);
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      r.max_error = std::max(r.max_error, oracle::grad_error(grads.tensors[t][i], numeric[i]));
      ++r.checked;
    }
  }
  return r;
}

}  // namespace gradcheck
