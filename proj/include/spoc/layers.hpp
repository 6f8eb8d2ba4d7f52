#pragma once

#include <cstddef>
#include <span>

#include "spoc/matrix.hpp"

namespace spoc::nn {

/// y = x * weights + bias, weights stored (in x out).
struct DenseLayer {
  Matrix weights;
  RowVector bias;

  [[nodiscard]] Eigen::Index in_width() const noexcept { return weights.rows(); }
  [[nodiscard]] Eigen::Index out_width() const noexcept { return weights.cols(); }
};

struct BatchNormLayer {
  RowVector gamma;
  RowVector beta;
  RowVector running_mean;
  RowVector running_var;
  double momentum = 0.9;
  double eps = 1e-5;
  /// Training batches seen; inference requires at least one.
  std::size_t steps_seen = 0;

  [[nodiscard]] static BatchNormLayer identity(Eigen::Index width);
  [[nodiscard]] Eigen::Index width() const noexcept { return gamma.size(); }
};

struct SigmoidLayer {};

struct DenseGrads {
  Matrix dx;
  Matrix dweights;
  RowVector dbias;
};

[[nodiscard]] Matrix dense_forward(const DenseLayer& layer, const Matrix& x);
[[nodiscard]] DenseGrads dense_backward(const DenseLayer& layer, const Matrix& x, const Matrix& dy);

/// Per-batch quantities the backward pass needs.
struct BatchNormCache {
  Matrix x_hat;
  RowVector batch_mean;
  RowVector batch_var;  // population variance
  RowVector inv_std;
};

struct BatchNormGrads {
  Matrix dx;
  RowVector dgamma;
  RowVector dbeta;
};

struct BatchNormTrainOutput {
  Matrix y;
  BatchNormCache cache;
};

/// Normalizes with the batch statistics and, when `update_running` is set,
/// folds them into the running statistics:
///   running = momentum * running + (1 - momentum) * batch.
/// Throws Error(kBatchTooSmall) for fewer than two rows.
[[nodiscard]] BatchNormTrainOutput bn_forward_train(BatchNormLayer& layer, const Matrix& x, bool update_running = true);

/// Uses the frozen running statistics; rows are independent. Throws
/// Error(kUnfitted) before any training step.
[[nodiscard]] Matrix bn_forward_infer(const BatchNormLayer& layer, const Matrix& x);

[[nodiscard]] BatchNormGrads bn_backward(const BatchNormLayer& layer, const BatchNormCache& cache, const Matrix& dy);

/// Logistic function, stable for large |x|.
[[nodiscard]] double sigmoid(double x) noexcept;
[[nodiscard]] Matrix sigmoid(const Matrix& x);
/// dL/dx given the sigmoid output y and dL/dy.
[[nodiscard]] Matrix sigmoid_backward(const Matrix& y, const Matrix& dy);

struct LossResult {
  double loss = 0.0;
  Matrix grad;  // (softmax - one_hot) / batch_size
};

/// Mean cross-entropy over rows with log-sum-exp stabilization.
[[nodiscard]] LossResult softmax_cross_entropy(const Matrix& logits, std::span<const int> labels);

[[nodiscard]] Matrix softmax(const Matrix& logits);

}  // namespace spoc::nn
