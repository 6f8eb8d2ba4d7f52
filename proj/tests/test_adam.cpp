#include <doctest.h>

#include <cmath>
#include <vector>

#include "spoc/adam.hpp"
#include "support.hpp"

using namespace spoc;
using namespace spoc::nn;
using support::error_code_of;

namespace {

// Hand-rolled scalar Adam.
struct ScalarAdam {
  double lr, b1, b2, eps;
  double m = 0, v = 0;
  int t = 0;

  double step(double w, double g) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    return w - lr * mh / (std::sqrt(vh) + eps);
  }
};

void step(AdamState& s, std::vector<double>& w, const std::vector<double>& g) {
  const std::vector<std::span<double>> p{std::span<double>(w)};
  const std::vector<std::span<const double>> gr{std::span<const double>(g)};
  adam_step(s, p, gr);
}

}  // namespace

TEST_CASE("first step moves each weight by about lr against the gradient") {
  AdamState s;
  std::vector<double> w{1.0, -2.0, 0.5};
  step(s, w, {3.0, -0.2, 50.0});
  CHECK(w[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-6));
  CHECK(w[1] == doctest::Approx(-2.0 + 1e-3).epsilon(1e-6));
  CHECK(w[2] == doctest::Approx(0.5 - 1e-3).epsilon(1e-6));
  CHECK(s.t == 1);
}

TEST_CASE("minimizing w^2 matches the scalar recurrence") {
  AdamState s;
  s.config.lr = 0.1;
  ScalarAdam o{0.1, 0.9, 0.999, 1e-8};
  std::vector<double> w{1.0};
  double ow = 1.0;
  for (int i = 0; i < 100; ++i) {
    const double g = 2 * w[0];
    step(s, w, {g});
    ow = o.step(ow, 2 * ow);
    CHECK(w[0] == doctest::Approx(ow).epsilon(1e-12));
  }
  CHECK(std::abs(w[0]) < 0.05);
}

TEST_CASE("size mismatches are rejected") {
  AdamState s;
  std::vector<double> w{1.0, 2.0};
  CHECK(error_code_of([&] { step(s, w, {1.0}); }) == ErrorCode::kDimensionMismatch);
  step(s, w, {1.0, 1.0});
  std::vector<double> w3{1, 2, 3};
  CHECK(error_code_of([&] { step(s, w3, {1, 1, 1}); }) == ErrorCode::kDimensionMismatch);
}

TEST_CASE("zero gradient leaves weights unchanged") {
  AdamState s;
  std::vector<double> w{0.3};
  step(s, w, {0.0});
  CHECK(w[0] == 0.3);
}
