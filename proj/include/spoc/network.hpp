#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "spoc/adam.hpp"
#include "spoc/dataset.hpp"
#include "spoc/json.hpp"
#include "spoc/layers.hpp"
#include "spoc/matrix.hpp"

namespace spoc::nn {

enum class LayerType { kDense, kBatchNorm, kSigmoid };

struct LayerDescriptor {
  LayerType type = LayerType::kDense;
  std::size_t width = 0;  // output width, Dense only

  friend bool operator==(const LayerDescriptor&, const LayerDescriptor&) = default;
};

struct NetworkSpec {
  std::string name;
  std::size_t input_dim = 0;
  std::size_t num_classes = data::kNumLevels;
  std::size_t hidden_width = 128;
  /// Ends with Dense(num_classes); the softmax head is implicit.
  std::vector<LayerDescriptor> layout;

  /// Throws Error(kInvalidSpec) unless the first layer is Dense, no two
  /// BatchNorm layers are adjacent, and the last layer is Dense(num_classes).
  void validate() const;
  [[nodiscard]] std::size_t count(LayerType type) const;
};

enum class LayoutKind { kStructure1, kStructure2, kStructure3, kSbnednn, kDepth };

struct LayoutChoice {
  LayoutKind kind = LayoutKind::kSbnednn;
  int depth = 3;  // Dense layer count for kDepth, 3..7

  [[nodiscard]] std::string name() const;
};

/// structure1|structure2|structure3|sbnednn|depth3..depth7. Throws
/// Error(kInvalidKind) otherwise.
[[nodiscard]] LayoutChoice parse_layout(std::string_view name);

/// Dense/BN orderings of the ablation study:
///   structure1  D D D
///   structure2  D D BN D
///   structure3  D BN D D
///   sbnednn     D BN D BN D
///   depthK      K Dense layers, BN after every hidden one
/// A sigmoid follows each BN, or each hidden Dense that has no BN after it.
[[nodiscard]] NetworkSpec make_layout(const LayoutChoice& choice, std::size_t input_dim,
                                      std::size_t num_classes = data::kNumLevels, std::size_t hidden_width = 128);

using Layer = std::variant<DenseLayer, BatchNormLayer, SigmoidLayer>;

/// Activations and batch statistics of one training-mode forward pass.
struct ForwardCache {
  std::uint64_t version = 0;
  bool valid = false;
  std::vector<Matrix> activations;  // activations[0] is the input
  std::vector<std::optional<BatchNormCache>> batch_norm;
};

/// Gradient tensors in the same order as Network::parameters().
struct Gradients {
  std::vector<std::vector<double>> tensors;

  [[nodiscard]] std::vector<std::span<const double>> views() const;
};

class Network {
 public:
  Network() = default;

  /// Xavier (Glorot) normal weights with variance 2 / (fan_in + fan_out),
  /// zero biases, identity batch normalization.
  [[nodiscard]] static Network xavier_init(const NetworkSpec& spec, std::uint64_t seed);

  /// Rebuilds a network from explicit layers; validated against the spec.
  [[nodiscard]] static Network from_layers(NetworkSpec spec, std::vector<Layer> layers);

  [[nodiscard]] const NetworkSpec& spec() const noexcept { return spec_; }
  [[nodiscard]] const std::vector<Layer>& layers() const noexcept { return layers_; }

  /// Training mode: BN layers use batch statistics (and update their running
  /// statistics when `update_running` is set). Returns logits.
  Matrix forward_train(const Matrix& x, ForwardCache& cache, bool update_running = true);

  /// Inference mode logits. Each row is computed on its own, so results do
  /// not depend on how rows are grouped into batches.
  [[nodiscard]] Matrix forward_infer(const Matrix& x) const;

  /// Throws Error(kStaleCache) if the cache is missing or the parameters
  /// changed since the forward pass.
  [[nodiscard]] Gradients backward(const ForwardCache& cache, const Matrix& dlogits) const;

  /// Mutable flat views of every parameter tensor (Dense W then b, BN gamma
  /// then beta, layer by layer). Invalidates outstanding caches.
  [[nodiscard]] std::vector<std::span<double>> parameters();
  [[nodiscard]] std::size_t parameter_count() const;

  void apply_adam(AdamState& state, const Gradients& grads);

  /// Argmax of the inference logits; ties go to the lowest class index.
  [[nodiscard]] std::vector<int> predict(const Matrix& x) const;

 private:
  NetworkSpec spec_;
  std::vector<Layer> layers_;
  std::uint64_t version_ = 1;
};

/// Row-wise argmax, lowest index on ties.
[[nodiscard]] std::vector<int> argmax_rows(const Matrix& scores);

struct TrainConfig {
  std::size_t batch_size = 128;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  /// Stop after this many epochs without a lower training loss; 0 disables.
  std::size_t patience = 10;
  AdamConfig adam;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double train_accuracy = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainedModel {
  Network network;
  std::optional<data::Standardizer> standardizer;
  std::vector<EpochRecord> log;
  /// Mean loss of the initialized network over the training set, batch
  /// statistics in BN layers.
  double initial_loss = 0.0;
  TrainConfig config;
  std::size_t adam_steps = 0;
};

/// Index ranges of the mini-batches for n rows. A trailing batch of one row
/// is merged into the previous batch.
[[nodiscard]] std::vector<std::pair<std::size_t, std::size_t>> make_batches(std::size_t n, std::size_t batch_size);

/// Mini-batch Adam training on standardized inputs. Throws
/// Error(kDivergence) if the loss becomes non-finite.
[[nodiscard]] TrainedModel train(const NetworkSpec& spec, const Matrix& x, std::span<const int> labels,
                                 const TrainConfig& config);

/// Applies the model's standardizer (if any) and predicts.
[[nodiscard]] std::vector<int> predict(const TrainedModel& model, const Matrix& raw_features);

[[nodiscard]] Json to_json(const NetworkSpec& spec);
[[nodiscard]] NetworkSpec network_spec_from_json(const Json& j);
[[nodiscard]] Json to_json(const TrainedModel& model);
[[nodiscard]] TrainedModel model_from_json(const Json& j);
[[nodiscard]] std::string format_training_log(const std::vector<EpochRecord>& log);

void save_model(const TrainedModel& model, const std::filesystem::path& path);
/// Throws Error(kFileError) or Error(kSchemaError).
[[nodiscard]] TrainedModel load_model(const std::filesystem::path& path);

inline constexpr int kModelFormatVersion = 1;

}  // namespace spoc::nn
