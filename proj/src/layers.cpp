#include "spoc/layers.hpp"

#include <cmath>
#include <string>

#include "spoc/error.hpp"

namespace spoc::nn {
namespace {

void require_width(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw Error(ErrorCode::kDimensionMismatch, std::string(what) + ": expected width " + std::to_string(want) +
                                                   ", got " + std::to_string(got));
  }
}

}  // namespace

BatchNormLayer BatchNormLayer::identity(Eigen::Index width) {
  BatchNormLayer bn;
  bn.gamma = RowVector::Ones(width);
  bn.beta = RowVector::Zero(width);
  bn.running_mean = RowVector::Zero(width);
  bn.running_var = RowVector::Ones(width);
  return bn;
}

Matrix dense_forward(const DenseLayer& layer, const Matrix& x) {
  require_width(x.cols(), layer.in_width(), "dense_forward");
  Matrix y = x * layer.weights;
  y.rowwise() += layer.bias;
  return y;
}

DenseGrads dense_backward(const DenseLayer& layer, const Matrix& x, const Matrix& dy) {
  require_width(x.cols(), layer.in_width(), "dense_backward input");
  require_width(dy.cols(), layer.out_width(), "dense_backward gradient");
  DenseGrads g;
  g.dweights = x.transpose() * dy;
  g.dbias = dy.colwise().sum();
  g.dx = dy * layer.weights.transpose();
  return g;
}

BatchNormTrainOutput bn_forward_train(BatchNormLayer& layer, const Matrix& x, bool update_running) {
  require_width(x.cols(), layer.width(), "bn_forward_train");
  if (x.rows() < 2) {
    throw Error(ErrorCode::kBatchTooSmall, "batch normalization needs at least 2 rows in training mode");
  }
  const double n = static_cast<double>(x.rows());
  BatchNormTrainOutput out;
  auto& c = out.cache;
  c.batch_mean = x.colwise().sum() / n;
  const Matrix centered = x.rowwise() - c.batch_mean;
  c.batch_var = centered.array().square().colwise().sum() / n;
  c.inv_std = (c.batch_var.array() + layer.eps).rsqrt();
  c.x_hat = centered.array().rowwise() * c.inv_std.array();
  out.y = (c.x_hat.array().rowwise() * layer.gamma.array()).rowwise() + layer.beta.array();

  if (update_running) {
    layer.running_mean = layer.momentum * layer.running_mean + (1.0 - layer.momentum) * c.batch_mean;
    layer.running_var = layer.momentum * layer.running_var + (1.0 - layer.momentum) * c.batch_var;
    ++layer.steps_seen;
  }
  return out;
}

Matrix bn_forward_infer(const BatchNormLayer& layer, const Matrix& x) {
  require_width(x.cols(), layer.width(), "bn_forward_infer");
  if (layer.steps_seen == 0) {
    throw Error(ErrorCode::kUnfitted, "batch normalization has no running statistics yet");
  }
  const RowVector scale = layer.gamma.array() * (layer.running_var.array() + layer.eps).rsqrt();
  Matrix y = (x.rowwise() - layer.running_mean).array().rowwise() * scale.array();
  y.rowwise() += layer.beta;
  return y;
}

BatchNormGrads bn_backward(const BatchNormLayer& layer, const BatchNormCache& cache, const Matrix& dy) {
  require_width(dy.cols(), layer.width(), "bn_backward");
  if (dy.rows() != cache.x_hat.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "bn_backward: gradient rows do not match the cached batch");
  }
  const double n = static_cast<double>(dy.rows());
  BatchNormGrads g;
  g.dbeta = dy.colwise().sum();
  g.dgamma = (dy.array() * cache.x_hat.array()).colwise().sum();

  const Matrix dx_hat = dy.array().rowwise() * layer.gamma.array();
  const RowVector sum_dx_hat = dx_hat.colwise().sum();
  const RowVector sum_dx_hat_x_hat = (dx_hat.array() * cache.x_hat.array()).colwise().sum();
  Matrix inner = (n * dx_hat).rowwise() - sum_dx_hat;
  inner -= (cache.x_hat.array().rowwise() * sum_dx_hat_x_hat.array()).matrix();
  g.dx = inner.array().rowwise() * (cache.inv_std.array() / n);
  return g;
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix sigmoid(const Matrix& x) {
  return x.unaryExpr([](double v) { return sigmoid(v); });
}

Matrix sigmoid_backward(const Matrix& y, const Matrix& dy) {
  return dy.array() * y.array() * (1.0 - y.array());
}

Matrix softmax(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const auto e = (logits.row(i).array() - m).exp();
    p.row(i) = e / e.sum();
  }
  return p;
}

LossResult softmax_cross_entropy(const Matrix& logits, std::span<const int> labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "softmax_cross_entropy: " + std::to_string(labels.size()) +
                                                   " labels for " + std::to_string(logits.rows()) + " rows");
  }
  if (logits.rows() == 0) throw Error(ErrorCode::kEmptyInput, "softmax_cross_entropy: empty batch");
  const auto k = logits.cols();
  for (int label : labels) {
    if (label < 0 || label >= k) {
      throw Error(ErrorCode::kLabelOutOfRange, "label " + std::to_string(label) + " outside [0, " +
                                                   std::to_string(k) + ")");
    }
  }
  const double n = static_cast<double>(logits.rows());
  LossResult r;
  r.grad.resize(logits.rows(), k);
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const auto shifted = logits.row(i).array() - m;
    const double sum_exp = shifted.exp().sum();
    const double log_z = std::log(sum_exp);
    const int y = labels[static_cast<std::size_t>(i)];
    total += log_z - shifted(y);
    r.grad.row(i) = shifted.exp() / sum_exp;
    r.grad(i, y) -= 1.0;
  }
  r.loss = total / n;
  r.grad /= n;
  return r;
}

}  // namespace spoc::nn
