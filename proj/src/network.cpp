#include "spoc/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "spoc/error.hpp"
#include "spoc/seed.hpp"

namespace spoc::nn {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

NetworkSpec from_bn_pattern(std::string name, const std::vector<bool>& bn_after_hidden, std::size_t input_dim,
                            std::size_t num_classes, std::size_t hidden_width) {
  NetworkSpec spec;
  spec.name = std::move(name);
  spec.input_dim = input_dim;
  spec.num_classes = num_classes;
  spec.hidden_width = hidden_width;
  for (bool bn : bn_after_hidden) {
    spec.layout.push_back({LayerType::kDense, hidden_width});
    if (bn) spec.layout.push_back({LayerType::kBatchNorm, 0});
    spec.layout.push_back({LayerType::kSigmoid, 0});
  }
  spec.layout.push_back({LayerType::kDense, num_classes});
  return spec;
}

}  // namespace

void NetworkSpec::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidSpec, "network spec: " + msg); };
  if (input_dim == 0) fail("input_dim must be positive");
  if (num_classes < 2) fail("num_classes must be at least 2");
  if (layout.empty()) fail("layout is empty");
  if (layout.front().type != LayerType::kDense) fail("first layer must be Dense");
  if (layout.back().type != LayerType::kDense || layout.back().width != num_classes) {
    fail("last layer must be Dense(num_classes)");
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (layout[i].type == LayerType::kDense && layout[i].width == 0) fail("Dense width must be positive");
    if (i > 0 && layout[i].type == LayerType::kBatchNorm && layout[i - 1].type == LayerType::kBatchNorm) {
      fail("BatchNorm layers may not be adjacent");
    }
  }
}

std::size_t NetworkSpec::count(LayerType type) const {
  return static_cast<std::size_t>(
      std::count_if(layout.begin(), layout.end(), [type](const LayerDescriptor& d) { return d.type == type; }));
}

std::string LayoutChoice::name() const {
  switch (kind) {
    case LayoutKind::kStructure1: return "structure1";
    case LayoutKind::kStructure2: return "structure2";
    case LayoutKind::kStructure3: return "structure3";
    case LayoutKind::kSbnednn: return "sbnednn";
    case LayoutKind::kDepth: break;
  }
  return "depth" + std::to_string(depth);
}

LayoutChoice parse_layout(std::string_view name) {
  if (name == "structure1") return {LayoutKind::kStructure1};
  if (name == "structure2") return {LayoutKind::kStructure2};
  if (name == "structure3") return {LayoutKind::kStructure3};
  if (name == "sbnednn" || name == "sbnedn") return {LayoutKind::kSbnednn};
  if (name.size() == 6 && name.substr(0, 5) == "depth") {
    const int k = name[5] - '0';
    if (k >= 3 && k <= 7) return {LayoutKind::kDepth, k};
  }
  throw Error(ErrorCode::kInvalidKind, "unknown layout '" + std::string(name) +
                                           "' (expected structure1-3, sbnednn or depth3-depth7)");
}

NetworkSpec make_layout(const LayoutChoice& choice, std::size_t input_dim, std::size_t num_classes,
                        std::size_t hidden_width) {
  std::vector<bool> pattern;
  switch (choice.kind) {
    case LayoutKind::kStructure1: pattern = {false, false}; break;
    case LayoutKind::kStructure2: pattern = {false, true}; break;
    case LayoutKind::kStructure3: pattern = {true, false}; break;
    case LayoutKind::kSbnednn: pattern = {true, true}; break;
    case LayoutKind::kDepth:
      if (choice.depth < 3 || choice.depth > 7) {
        throw Error(ErrorCode::kInvalidKind, "depth must be between 3 and 7");
      }
      pattern.assign(static_cast<std::size_t>(choice.depth - 1), true);
      break;
  }
  auto spec = from_bn_pattern(choice.name(), pattern, input_dim, num_classes, hidden_width);
  spec.validate();
  return spec;
}

std::vector<std::span<const double>> Gradients::views() const {
  std::vector<std::span<const double>> out;
  out.reserve(tensors.size());
  for (const auto& t : tensors) out.emplace_back(t);
  return out;
}

Network Network::xavier_init(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  Network net;
  net.spec_ = spec;
  auto width = static_cast<Eigen::Index>(spec.input_dim);
  for (const auto& d : spec.layout) {
    switch (d.type) {
      case LayerType::kDense: {
        const auto out = static_cast<Eigen::Index>(d.width);
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(width + out)));
        DenseLayer dense;
        dense.weights.resize(width, out);
        for (Eigen::Index i = 0; i < dense.weights.size(); ++i) dense.weights.data()[i] = dist(rng);
        dense.bias = RowVector::Zero(out);
        net.layers_.emplace_back(std::move(dense));
        width = out;
        break;
      }
      case LayerType::kBatchNorm: net.layers_.emplace_back(BatchNormLayer::identity(width)); break;
      case LayerType::kSigmoid: net.layers_.emplace_back(SigmoidLayer{}); break;
    }
  }
  return net;
}

Network Network::from_layers(NetworkSpec spec, std::vector<Layer> layers) {
  spec.validate();
  if (layers.size() != spec.layout.size()) {
    throw Error(ErrorCode::kInvalidSpec, "layer count does not match the network spec");
  }
  auto width = static_cast<Eigen::Index>(spec.input_dim);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& d = spec.layout[i];
    const bool ok = std::visit(
        Overloaded{
            [&](const DenseLayer& l) {
              const bool shapes = d.type == LayerType::kDense && l.in_width() == width &&
                                  l.out_width() == static_cast<Eigen::Index>(d.width) &&
                                  l.bias.size() == l.out_width();
              width = l.out_width();
              return shapes;
            },
            [&](const BatchNormLayer& l) {
              return d.type == LayerType::kBatchNorm && l.width() == width && l.beta.size() == width &&
                     l.running_mean.size() == width && l.running_var.size() == width;
            },
            [&](const SigmoidLayer&) { return d.type == LayerType::kSigmoid; },
        },
        layers[i]);
    if (!ok) throw Error(ErrorCode::kInvalidSpec, "layer " + std::to_string(i) + " does not match the spec");
  }
  Network net;
  net.spec_ = std::move(spec);
  net.layers_ = std::move(layers);
  return net;
}

Matrix Network::forward_train(const Matrix& x, ForwardCache& cache, bool update_running) {
  if (static_cast<std::size_t>(x.cols()) != spec_.input_dim) {
    throw Error(ErrorCode::kDimensionMismatch, "network expects " + std::to_string(spec_.input_dim) +
                                                   " inputs, got " + std::to_string(x.cols()));
  }
  cache.valid = false;
  cache.activations.clear();
  cache.batch_norm.assign(layers_.size(), std::nullopt);
  cache.activations.reserve(layers_.size() + 1);
  cache.activations.push_back(x);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Matrix& in = cache.activations.back();
    Matrix out = std::visit(Overloaded{
                                [&](DenseLayer& l) { return dense_forward(l, in); },
                                [&](BatchNormLayer& l) {
                                  auto r = bn_forward_train(l, in, update_running);
                                  cache.batch_norm[i] = std::move(r.cache);
                                  return std::move(r.y);
                                },
                                [&](SigmoidLayer&) { return sigmoid(in); },
                            },
                            layers_[i]);
    cache.activations.push_back(std::move(out));
  }
  cache.version = version_;
  cache.valid = true;
  return cache.activations.back();
}

Matrix Network::forward_infer(const Matrix& x) const {
  if (static_cast<std::size_t>(x.cols()) != spec_.input_dim) {
    throw Error(ErrorCode::kDimensionMismatch, "network expects " + std::to_string(spec_.input_dim) +
                                                   " inputs, got " + std::to_string(x.cols()));
  }
  Matrix logits(x.rows(), static_cast<Eigen::Index>(spec_.num_classes));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Matrix h = x.row(r);
    for (const auto& layer : layers_) {
      h = std::visit(Overloaded{
                         [&](const DenseLayer& l) { return dense_forward(l, h); },
                         [&](const BatchNormLayer& l) { return bn_forward_infer(l, h); },
                         [&](const SigmoidLayer&) { return sigmoid(h); },
                     },
                     layer);
    }
    logits.row(r) = h;
  }
  return logits;
}

Gradients Network::backward(const ForwardCache& cache, const Matrix& dlogits) const {
  if (!cache.valid || cache.version != version_ || cache.activations.size() != layers_.size() + 1) {
    throw Error(ErrorCode::kStaleCache, "backward called without a matching forward pass");
  }
  if (dlogits.rows() != cache.activations.back().rows() || dlogits.cols() != cache.activations.back().cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "loss gradient shape does not match the cached logits");
  }
  // Per-layer tensors collected back to front, then reordered.
  std::vector<std::vector<std::vector<double>>> per_layer(layers_.size());
  Matrix grad = dlogits;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    std::visit(Overloaded{
                   [&](const DenseLayer& l) {
                     auto g = dense_backward(l, cache.activations[k], grad);
                     per_layer[k].emplace_back(g.dweights.data(), g.dweights.data() + g.dweights.size());
                     per_layer[k].emplace_back(g.dbias.data(), g.dbias.data() + g.dbias.size());
                     grad = std::move(g.dx);
                   },
                   [&](const BatchNormLayer& l) {
                     auto g = bn_backward(l, *cache.batch_norm[k], grad);
                     per_layer[k].emplace_back(g.dgamma.data(), g.dgamma.data() + g.dgamma.size());
                     per_layer[k].emplace_back(g.dbeta.data(), g.dbeta.data() + g.dbeta.size());
                     grad = std::move(g.dx);
                   },
                   [&](const SigmoidLayer&) { grad = sigmoid_backward(cache.activations[k + 1], grad); },
               },
               layers_[k]);
  }
  Gradients out;
  for (auto& tensors : per_layer) {
    for (auto& t : tensors) out.tensors.push_back(std::move(t));
  }
  return out;
}

std::vector<std::span<double>> Network::parameters() {
  ++version_;
  std::vector<std::span<double>> out;
  for (auto& layer : layers_) {
    std::visit(Overloaded{
                   [&](DenseLayer& l) {
                     out.emplace_back(l.weights.data(), static_cast<std::size_t>(l.weights.size()));
                     out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
                   },
                   [&](BatchNormLayer& l) {
                     out.emplace_back(l.gamma.data(), static_cast<std::size_t>(l.gamma.size()));
                     out.emplace_back(l.beta.data(), static_cast<std::size_t>(l.beta.size()));
                   },
                   [](SigmoidLayer&) {},
               },
               layer);
  }
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) {
    std::visit(Overloaded{
                   [&](const DenseLayer& l) { n += static_cast<std::size_t>(l.weights.size() + l.bias.size()); },
                   [&](const BatchNormLayer& l) { n += static_cast<std::size_t>(l.gamma.size() + l.beta.size()); },
                   [](const SigmoidLayer&) {},
               },
               layer);
  }
  return n;
}

void Network::apply_adam(AdamState& state, const Gradients& grads) {
  const auto params = parameters();
  const auto views = grads.views();
  adam_step(state, params, views);
}

std::vector<int> argmax_rows(const Matrix& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < scores.cols(); ++j) {
      if (scores(i, j) > scores(i, best)) best = j;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> Network::predict(const Matrix& x) const { return argmax_rows(forward_infer(x)); }

std::vector<std::pair<std::size_t, std::size_t>> make_batches(std::size_t n, std::size_t batch_size) {
  if (batch_size == 0) throw Error(ErrorCode::kInvalidSpec, "batch_size must be positive");
  std::vector<std::pair<std::size_t, std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    batches.emplace_back(start, std::min(n, start + batch_size));
  }
  if (batches.size() > 1 && batches.back().second - batches.back().first == 1) {
    batches[batches.size() - 2].second = n;
    batches.pop_back();
  }
  return batches;
}

namespace {

Matrix gather_rows(const Matrix& x, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

double accuracy(std::span<const int> predicted, std::span<const int> labels) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace

TrainedModel train(const NetworkSpec& spec, const Matrix& x, std::span<const int> labels, const TrainConfig& config) {
  spec.validate();
  if (x.rows() < 2) throw Error(ErrorCode::kEmptyDataset, "training needs at least 2 rows");
  if (static_cast<std::size_t>(x.rows()) != labels.size()) {
    throw Error(ErrorCode::kLengthMismatch, "feature rows and labels differ in count");
  }
  if (config.batch_size == 0) throw Error(ErrorCode::kInvalidSpec, "batch_size must be positive");
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= spec.num_classes) {
      throw Error(ErrorCode::kLabelOutOfRange, "label " + std::to_string(label) + " out of range");
    }
  }

  TrainedModel model;
  model.config = config;
  model.network = Network::xavier_init(spec, derive_seed(config.seed, "init"));

  {
    ForwardCache probe;
    const Matrix logits = model.network.forward_train(x, probe, /*update_running=*/false);
    model.initial_loss = softmax_cross_entropy(logits, labels).loss;
  }

  AdamState adam;
  adam.config = config.adam;
  std::mt19937_64 rng(derive_seed(config.seed, "shuffle"));
  const auto n = static_cast<std::size_t>(x.rows());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batches = make_batches(n, config.batch_size);

  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t stale_epochs = 0;
  ForwardCache cache;
  std::vector<int> batch_labels;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (const auto& [begin, end] : batches) {
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);
      const Matrix xb = gather_rows(x, rows);
      batch_labels.clear();
      for (auto r : rows) batch_labels.push_back(labels[r]);

      const Matrix logits = model.network.forward_train(xb, cache);
      const auto loss = softmax_cross_entropy(logits, batch_labels);
      if (!std::isfinite(loss.loss)) {
        throw Error(ErrorCode::kDivergence, "training loss became non-finite in epoch " + std::to_string(epoch));
      }
      loss_sum += loss.loss * static_cast<double>(rows.size());
      const Gradients grads = model.network.backward(cache, loss.grad);
      model.network.apply_adam(adam, grads);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = loss_sum / static_cast<double>(n);
    rec.train_accuracy = accuracy(model.network.predict(x), labels);
    model.log.push_back(rec);

    if (rec.mean_loss < best_loss) {
      best_loss = rec.mean_loss;
      stale_epochs = 0;
    } else if (config.patience > 0 && ++stale_epochs >= config.patience) {
      break;
    }
  }
  model.adam_steps = adam.t;
  return model;
}

std::vector<int> predict(const TrainedModel& model, const Matrix& raw_features) {
  if (model.standardizer) return model.network.predict(data::apply_standardizer(*model.standardizer, raw_features));
  return model.network.predict(raw_features);
}

}  // namespace spoc::nn
