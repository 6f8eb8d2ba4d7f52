#include <doctest.h>

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "oracles.hpp"
#include "spoc/layers.hpp"
#include "support.hpp"

using namespace spoc;
using namespace spoc::nn;
using support::error_code_of;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

std::span<double> flat(Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> flat(RowVector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

// Scalar objective sum(y .* w) so dL/dy = w.
double weighted_sum(const Matrix& y, const Matrix& w) { return (y.array() * w.array()).sum(); }

void check_grad(const Matrix& analytic, const std::vector<double>& numeric) {
  REQUIRE(static_cast<std::size_t>(analytic.size()) == numeric.size());
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    CHECK(oracle::grad_error(analytic.data()[i], numeric[i]) < 1e-5);
  }
}

}  // namespace

TEST_CASE("dense forward matches naive matmul") {
  std::mt19937_64 rng(1);
  DenseLayer d{random_matrix(4, 3, rng), random_matrix(1, 3, rng)};
  const Matrix x = random_matrix(5, 4, rng);
  Matrix expected = oracle::matmul(x, d.weights);
  for (Eigen::Index i = 0; i < expected.rows(); ++i) expected.row(i) += d.bias;
  CHECK((dense_forward(d, x) - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(error_code_of([&] { (void)dense_forward(d, Matrix::Zero(2, 3)); }) == ErrorCode::kDimensionMismatch);
}

TEST_CASE("dense backward matches finite differences") {
  std::mt19937_64 rng(2);
  DenseLayer d{random_matrix(4, 3, rng), random_matrix(1, 3, rng)};
  Matrix x = random_matrix(6, 4, rng);
  const Matrix w = random_matrix(6, 3, rng);
  const auto g = dense_backward(d, x, w);
  auto f = [&] { return weighted_sum(dense_forward(d, x), w); };
  check_grad(g.dweights, oracle::numeric_gradient(flat(d.weights), f));
  check_grad(g.dbias, oracle::numeric_gradient(flat(d.bias), f));
  check_grad(g.dx, oracle::numeric_gradient(flat(x), f));
}

TEST_CASE("batch norm normalizes in training mode") {
  std::mt19937_64 rng(3);
  auto bn = BatchNormLayer::identity(5);
  Matrix x = random_matrix(64, 5, rng, 7.0);
  x.array() += 30.0;
  const auto out = bn_forward_train(bn, x);
  for (Eigen::Index c = 0; c < 5; ++c) {
    const double mean = out.y.col(c).mean();
    const double var = (out.y.col(c).array() - mean).square().mean();
    CHECK(std::abs(mean) < 1e-7);
    CHECK(std::abs(var - 1.0) < 0.01);
  }
  CHECK(bn.steps_seen == 1);
  CHECK(bn.running_mean.isApprox(0.1 * out.cache.batch_mean));
  CHECK(bn.running_var.isApprox(0.9 * RowVector::Ones(5) + 0.1 * out.cache.batch_var));
}

TEST_CASE("batch norm running statistics are optional") {
  std::mt19937_64 rng(4);
  auto bn = BatchNormLayer::identity(3);
  (void)bn_forward_train(bn, random_matrix(8, 3, rng), false);
  CHECK(bn.steps_seen == 0);
  CHECK(bn.running_mean.isZero());
  CHECK(error_code_of([&] { (void)bn_forward_infer(bn, random_matrix(2, 3, rng)); }) == ErrorCode::kUnfitted);
  CHECK(error_code_of([&] { (void)bn_forward_train(bn, random_matrix(1, 3, rng)); }) == ErrorCode::kBatchTooSmall);
}

TEST_CASE("batch norm inference uses running statistics row by row") {
  std::mt19937_64 rng(5);
  auto bn = BatchNormLayer::identity(4);
  bn.gamma = random_matrix(1, 4, rng);
  bn.beta = random_matrix(1, 4, rng);
  for (int i = 0; i < 10; ++i) (void)bn_forward_train(bn, random_matrix(16, 4, rng, 3.0));
  const Matrix x = random_matrix(9, 4, rng);
  const Matrix all = bn_forward_infer(bn, x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Matrix row = bn_forward_infer(bn, x.row(i));
    CHECK(row == all.row(i));
    for (Eigen::Index c = 0; c < 4; ++c) {
      const double expect =
          bn.gamma(c) * (x(i, c) - bn.running_mean(c)) / std::sqrt(bn.running_var(c) + bn.eps) + bn.beta(c);
      CHECK(all(i, c) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("batch norm backward matches finite differences") {
  std::mt19937_64 rng(6);
  auto bn = BatchNormLayer::identity(3);
  bn.gamma = random_matrix(1, 3, rng);
  bn.beta = random_matrix(1, 3, rng);
  Matrix x = random_matrix(7, 3, rng, 2.0);
  const Matrix w = random_matrix(7, 3, rng);
  const auto out = bn_forward_train(bn, x, false);
  const auto g = bn_backward(bn, out.cache, w);
  auto f = [&] { return weighted_sum(bn_forward_train(bn, x, false).y, w); };
  check_grad(g.dx, oracle::numeric_gradient(flat(x), f));
  check_grad(g.dgamma, oracle::numeric_gradient(flat(bn.gamma), f));
  check_grad(g.dbeta, oracle::numeric_gradient(flat(bn.beta), f));
}

TEST_CASE("sigmoid") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(std::isfinite(sigmoid(-800.0)));
  CHECK(sigmoid(2.0) + sigmoid(-2.0) == doctest::Approx(1.0));
  std::mt19937_64 rng(7);
  Matrix x = random_matrix(4, 3, rng);
  const Matrix w = random_matrix(4, 3, rng);
  const Matrix y = sigmoid(x);
  check_grad(sigmoid_backward(y, w), oracle::numeric_gradient(flat(x), [&] { return weighted_sum(sigmoid(x), w); }));
}

TEST_CASE("softmax cross entropy") {
  Matrix logits(2, 3);
  logits << 1, 2, 3, 0, 0, 0;
  const std::vector<int> labels{2, 0};
  const auto r = softmax_cross_entropy(logits, labels);
  const double l0 = -std::log(std::exp(3.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(3.0)));
  const double l1 = std::log(3.0);
  CHECK(r.loss == doctest::Approx((l0 + l1) / 2).epsilon(1e-12));
  CHECK(softmax(logits).rowwise().sum().isOnes(1e-12));
  CHECK(r.grad.rowwise().sum().isZero(1e-12));

  Matrix big(1, 2);
  big << 1000, -1000;
  CHECK(std::isfinite(softmax_cross_entropy(big, std::vector<int>{1}).loss));

  std::mt19937_64 rng(8);
  Matrix z = random_matrix(5, 4, rng, 3.0);
  const std::vector<int> y{0, 3, 1, 1, 2};
  check_grad(softmax_cross_entropy(z, y).grad,
             oracle::numeric_gradient(flat(z), [&] { return softmax_cross_entropy(z, y).loss; }));

  CHECK(error_code_of([&] { (void)softmax_cross_entropy(logits, std::vector<int>{0}); }) ==
        ErrorCode::kDimensionMismatch);
  CHECK(error_code_of([&] { (void)softmax_cross_entropy(logits, std::vector<int>{0, 3}); }) ==
        ErrorCode::kLabelOutOfRange);
  CHECK(error_code_of([&] { (void)softmax_cross_entropy(Matrix(0, 3), std::vector<int>{}); }) ==
        ErrorCode::kEmptyInput);
}
