#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "gradcheck.hpp"
#include "spoc/dataset.hpp"
#include "spoc/network.hpp"
#include "support.hpp"

using namespace spoc;
using namespace spoc::nn;
using support::error_code_of;

namespace {

std::vector<LayerType> types(const NetworkSpec& s) {
  std::vector<LayerType> t;
  for (const auto& l : s.layout) t.push_back(l.type);
  return t;
}

constexpr auto D = LayerType::kDense;
constexpr auto B = LayerType::kBatchNorm;
constexpr auto S = LayerType::kSigmoid;

struct Toy {
  Matrix x;
  std::vector<int> y;
};

// Three Gaussian blobs in 4 dimensions.
Toy toy_problem(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0, 0.5);
  Toy t;
  t.x.resize(static_cast<Eigen::Index>(n), 4);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % 3);
    t.y.push_back(c);
    for (Eigen::Index j = 0; j < 4; ++j) {
      t.x(static_cast<Eigen::Index>(i), j) = (j == c ? 2.0 : 0.0) + noise(rng);
    }
  }
  return t;
}

}  // namespace

TEST_CASE("layouts") {
  const auto s1 = make_layout({LayoutKind::kStructure1}, 10, 6, 8);
  CHECK(types(s1) == std::vector<LayerType>{D, S, D, S, D});
  CHECK(types(make_layout({LayoutKind::kStructure2}, 10, 6, 8)) == std::vector<LayerType>{D, S, D, B, S, D});
  CHECK(types(make_layout({LayoutKind::kStructure3}, 10, 6, 8)) == std::vector<LayerType>{D, B, S, D, S, D});
  const auto sb = make_layout({LayoutKind::kSbnednn}, 10, 6, 8);
  CHECK(types(sb) == std::vector<LayerType>{D, B, S, D, B, S, D});
  CHECK(sb.count(D) == 3);
  CHECK(sb.count(B) == 2);
  CHECK(sb.layout.back().width == 6);
  for (int k = 3; k <= 7; ++k) {
    const auto s = make_layout({LayoutKind::kDepth, k}, 10, 6, 8);
    CHECK(s.count(D) == static_cast<std::size_t>(k));
    CHECK(s.count(B) == static_cast<std::size_t>(k - 1));
  }
  CHECK(error_code_of([] { (void)make_layout({LayoutKind::kDepth, 8}, 10); }) == ErrorCode::kInvalidKind);
}

TEST_CASE("parse_layout") {
  CHECK(parse_layout("sbnednn").kind == LayoutKind::kSbnednn);
  CHECK(parse_layout("sbnedn").kind == LayoutKind::kSbnednn);
  CHECK(parse_layout("structure2").kind == LayoutKind::kStructure2);
  const auto d5 = parse_layout("depth5");
  CHECK(d5.kind == LayoutKind::kDepth);
  CHECK(d5.depth == 5);
  CHECK(d5.name() == "depth5");
  CHECK(error_code_of([] { (void)parse_layout("resnet"); }) == ErrorCode::kInvalidKind);
  CHECK(error_code_of([] { (void)parse_layout("depth9"); }) == ErrorCode::kInvalidKind);
}

TEST_CASE("spec validation") {
  NetworkSpec s = make_layout({LayoutKind::kSbnednn}, 4, 6, 8);
  s.layout.back().width = 5;
  CHECK(error_code_of([&] { s.validate(); }) == ErrorCode::kInvalidSpec);
  s = make_layout({LayoutKind::kSbnednn}, 4, 6, 8);
  s.layout.insert(s.layout.begin() + 1, {B, 0});
  CHECK(error_code_of([&] { s.validate(); }) == ErrorCode::kInvalidSpec);
  s = make_layout({LayoutKind::kSbnednn}, 4, 6, 8);
  s.layout.insert(s.layout.begin(), {S, 0});
  CHECK(error_code_of([&] { s.validate(); }) == ErrorCode::kInvalidSpec);
}

TEST_CASE("xavier initialization") {
  const auto spec = make_layout({LayoutKind::kStructure1}, 200, 6, 300);
  const auto net = Network::xavier_init(spec, 1);
  const auto& d = std::get<DenseLayer>(net.layers()[0]);
  const double var = d.weights.array().square().mean();
  CHECK(var == doctest::Approx(2.0 / 500.0).epsilon(0.05));
  CHECK(d.bias.isZero());
  const auto again = Network::xavier_init(spec, 1);
  CHECK(std::get<DenseLayer>(again.layers()[0]).weights == d.weights);
  CHECK(std::get<DenseLayer>(Network::xavier_init(spec, 2).layers()[0]).weights != d.weights);
  CHECK(net.parameter_count() == 200 * 300 + 300 + 300 * 300 + 300 + 300 * 6 + 6);
}

TEST_CASE("network gradients match finite differences") {
  for (auto kind : {LayoutKind::kStructure1, LayoutKind::kStructure2, LayoutKind::kStructure3, LayoutKind::kSbnednn}) {
    const auto spec = make_layout({kind}, 5, 4, 6);
    const auto r = gradcheck::check_network(spec, 7, 100 + static_cast<std::uint64_t>(kind));
    CHECK(r.checked == Network::xavier_init(spec, 0).parameter_count());
    CHECK(r.max_error < 1e-5);
  }
  const auto r = gradcheck::check_network(make_layout({LayoutKind::kDepth, 6}, 3, 3, 4), 5, 9);
  CHECK(r.max_error < 1e-5);
}

TEST_CASE("backward rejects stale caches") {
  auto net = Network::xavier_init(make_layout({LayoutKind::kSbnednn}, 3, 3, 4), 0);
  ForwardCache cache;
  CHECK(error_code_of([&] { (void)net.backward(cache, Matrix::Zero(2, 3)); }) == ErrorCode::kStaleCache);
  const Matrix x = Matrix::Random(4, 3);
  const Matrix logits = net.forward_train(x, cache);
  CHECK_NOTHROW((void)net.backward(cache, logits));
  (void)net.parameters();
  CHECK(error_code_of([&] { (void)net.backward(cache, logits); }) == ErrorCode::kStaleCache);
  CHECK(error_code_of([&] { (void)net.forward_infer(Matrix::Zero(2, 5)); }) == ErrorCode::kDimensionMismatch);
}

TEST_CASE("inference ignores batch grouping") {
  auto net = Network::xavier_init(make_layout({LayoutKind::kSbnednn}, 4, 3, 8), 3);
  const auto toy = toy_problem(64, 1);
  ForwardCache cache;
  for (int i = 0; i < 5; ++i) (void)net.forward_train(toy.x.middleRows(i * 8, 8), cache);
  const Matrix all = net.forward_infer(toy.x);
  const Matrix a = net.forward_infer(toy.x.topRows(13));
  const Matrix b = net.forward_infer(toy.x.bottomRows(51));
  CHECK(a == all.topRows(13));
  CHECK(b == all.bottomRows(51));
}

TEST_CASE("argmax and batches") {
  Matrix s(3, 3);
  s << 1, 3, 3, 0, 0, 0, -1, -2, 5;
  CHECK(argmax_rows(s) == std::vector<int>{1, 0, 2});
  const auto b = make_batches(10, 3);
  REQUIRE(b.size() == 3);
  CHECK(b.back() == std::pair<std::size_t, std::size_t>{6, 10});
  CHECK(make_batches(9, 3).size() == 3);
  CHECK(make_batches(2, 5).size() == 1);
}

TEST_CASE("training learns a toy problem") {
  const auto toy = toy_problem(300, 2);
  const auto spec = make_layout({LayoutKind::kSbnednn}, 4, 3, 16);
  TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.epochs = 30;
  cfg.adam.lr = 0.01;
  cfg.seed = 4;
  const auto model = train(spec, toy.x, toy.y, cfg);
  REQUIRE_FALSE(model.log.empty());
  CHECK(model.log.front().mean_loss < model.initial_loss);
  CHECK(model.log.back().train_accuracy > 0.95);
  CHECK(model.adam_steps == model.log.size() * make_batches(300, 32).size());

  const auto again = train(spec, toy.x, toy.y, cfg);
  CHECK(again.log == model.log);
  CHECK(to_json(again).dump() == to_json(model).dump());
}

TEST_CASE("one epoch on noise-free data lowers the loss") {
  data::SyntheticSpec sspec;
  sspec.n = 600;
  sspec.noise = 0;
  const auto ds = data::synthesize_dataset(sspec);
  const Matrix x = data::apply_standardizer(data::fit_standardizer(ds), ds);
  TrainConfig cfg;
  cfg.epochs = 1;
  const auto model = train(make_layout({LayoutKind::kSbnednn}, ds.dim(), 6, 32), x, ds.levels, cfg);
  REQUIRE(model.log.size() == 1);
  CHECK(model.log[0].mean_loss < model.initial_loss);
}

TEST_CASE("zero epochs returns the initialization") {
  const auto toy = toy_problem(30, 3);
  const auto spec = make_layout({LayoutKind::kStructure1}, 4, 3, 5);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 6;
  const auto model = train(spec, toy.x, toy.y, cfg);
  CHECK(model.log.empty());
  const auto init = Network::xavier_init(spec, derive_seed(std::uint64_t{6}, "init"));
  CHECK(std::get<DenseLayer>(model.network.layers()[0]).weights == std::get<DenseLayer>(init.layers()[0]).weights);
}

TEST_CASE("early stopping") {
  const auto toy = toy_problem(60, 4);
  const auto spec = make_layout({LayoutKind::kStructure1}, 4, 3, 5);
  TrainConfig cfg;
  cfg.epochs = 500;
  cfg.patience = 2;
  cfg.adam.lr = 0.5;
  const auto model = train(spec, toy.x, toy.y, cfg);
  CHECK(model.log.size() < 500);
}

TEST_CASE("training errors") {
  const auto toy = toy_problem(30, 3);
  const auto spec = make_layout({LayoutKind::kStructure1}, 4, 3, 5);
  std::vector<int> bad = toy.y;
  bad[0] = 7;
  CHECK(error_code_of([&] { (void)train(spec, toy.x, bad, {}); }) == ErrorCode::kLabelOutOfRange);
  CHECK(error_code_of([&] { (void)train(spec, toy.x, std::vector<int>{0, 1}, {}); }) == ErrorCode::kLengthMismatch);
  Matrix huge = toy.x * 1e308;
  huge(0, 0) = std::numeric_limits<double>::infinity();
  CHECK(error_code_of([&] { (void)train(spec, huge, toy.y, {}); }) == ErrorCode::kDivergence);
}

TEST_CASE("model save and load round trip") {
  const auto toy = toy_problem(90, 5);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  auto model = train(make_layout({LayoutKind::kSbnednn}, 4, 3, 6), toy.x, toy.y, cfg);
  model.standardizer = data::fit_standardizer(toy.x);
  const auto path = std::filesystem::temp_directory_path() / "spoc_model_roundtrip.json";
  save_model(model, path);
  const auto back = load_model(path);
  std::filesystem::remove(path);
  CHECK(back.network.forward_infer(toy.x) == model.network.forward_infer(toy.x));
  CHECK(predict(back, toy.x) == predict(model, toy.x));
  CHECK(back.log == model.log);
  CHECK(to_json(back).dump() == to_json(model).dump());
  CHECK(format_training_log(model.log).rfind("epoch,mean_loss,train_accuracy\n", 0) == 0);

  CHECK(error_code_of([] { (void)load_model("/nonexistent/model.json"); }) == ErrorCode::kFileError);
  CHECK(error_code_of([] { (void)model_from_json(Json{{"format_version", 1}}); }) == ErrorCode::kSchemaError);
}
