#include <cstdio>
#include <fstream>
#include <sstream>

#include "spoc/error.hpp"
#include "spoc/network.hpp"

namespace spoc::nn {
namespace {

std::string_view layer_type_name(LayerType t) {
  switch (t) {
    case LayerType::kDense: return "dense";
    case LayerType::kBatchNorm: return "batchnorm";
    case LayerType::kSigmoid: break;
  }
  return "sigmoid";
}

LayerType layer_type_from(const std::string& s) {
  if (s == "dense") return LayerType::kDense;
  if (s == "batchnorm") return LayerType::kBatchNorm;
  if (s == "sigmoid") return LayerType::kSigmoid;
  throw Error(ErrorCode::kSchemaError, "unknown layer type '" + s + "'");
}

template <class Derived>
Json tensor_json(const Eigen::DenseBase<Derived>& m) {
  Json j;
  j["shape"] = {m.rows(), m.cols()};
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  }
  j["data"] = std::move(flat);
  return j;
}

Matrix tensor_from_json(const Json& j) {
  const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (shape.size() != 2 || shape[0] < 0 || shape[1] < 0 ||
      static_cast<std::size_t>(shape[0] * shape[1]) != data.size()) {
    throw Error(ErrorCode::kSchemaError, "tensor shape does not match its data");
  }
  return Eigen::Map<const Matrix>(data.data(), shape[0], shape[1]);
}

RowVector row_from_json(const Json& j) {
  const Matrix m = tensor_from_json(j);
  if (m.rows() != 1) throw Error(ErrorCode::kSchemaError, "expected a row vector");
  return m.row(0);
}

}  // namespace

Json to_json(const NetworkSpec& spec) {
  Json j;
  j["name"] = spec.name;
  j["input_dim"] = spec.input_dim;
  j["num_classes"] = spec.num_classes;
  j["hidden_width"] = spec.hidden_width;
  Json layout = Json::array();
  for (const auto& d : spec.layout) {
    Json l;
    l["type"] = layer_type_name(d.type);
    if (d.type == LayerType::kDense) l["width"] = d.width;
    layout.push_back(std::move(l));
  }
  j["layout"] = std::move(layout);
  return j;
}

NetworkSpec network_spec_from_json(const Json& j) {
  NetworkSpec spec;
  spec.name = j.at("name").get<std::string>();
  spec.input_dim = j.at("input_dim").get<std::size_t>();
  spec.num_classes = j.at("num_classes").get<std::size_t>();
  spec.hidden_width = j.at("hidden_width").get<std::size_t>();
  for (const auto& l : j.at("layout")) {
    LayerDescriptor d;
    d.type = layer_type_from(l.at("type").get<std::string>());
    if (d.type == LayerType::kDense) d.width = l.at("width").get<std::size_t>();
    spec.layout.push_back(d);
  }
  spec.validate();
  return spec;
}

Json to_json(const TrainedModel& model) {
  Json j;
  j["format_version"] = kModelFormatVersion;
  j["seed"] = model.config.seed;
  j["spec"] = to_json(model.network.spec());

  Json layers = Json::array();
  for (const auto& layer : model.network.layers()) {
    Json l;
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      l["type"] = "dense";
      l["weights"] = tensor_json(d->weights);
      l["bias"] = tensor_json(d->bias);
    } else if (const auto* bn = std::get_if<BatchNormLayer>(&layer)) {
      l["type"] = "batchnorm";
      l["gamma"] = tensor_json(bn->gamma);
      l["beta"] = tensor_json(bn->beta);
      l["running_mean"] = tensor_json(bn->running_mean);
      l["running_var"] = tensor_json(bn->running_var);
      l["momentum"] = bn->momentum;
      l["eps"] = bn->eps;
      l["steps_seen"] = bn->steps_seen;
    } else {
      l["type"] = "sigmoid";
    }
    layers.push_back(std::move(l));
  }
  j["layers"] = std::move(layers);
  j["standardizer"] = model.standardizer ? data::to_json(*model.standardizer) : Json(nullptr);

  Json log = Json::array();
  for (const auto& r : model.log) {
    log.push_back({{"epoch", r.epoch}, {"mean_loss", r.mean_loss}, {"train_accuracy", r.train_accuracy}});
  }
  j["training_log"] = std::move(log);
  j["initial_loss"] = model.initial_loss;

  const auto& c = model.config;
  j["train_config"] = {{"batch_size", c.batch_size}, {"epochs", c.epochs},     {"seed", c.seed},
                       {"patience", c.patience},     {"lr", c.adam.lr},        {"beta1", c.adam.beta1},
                       {"beta2", c.adam.beta2},      {"adam_eps", c.adam.eps}, {"adam_steps", model.adam_steps}};
  return j;
}

TrainedModel model_from_json(const Json& j) {
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion) {
      throw Error(ErrorCode::kSchemaError, "unsupported model format_version");
    }
    TrainedModel model;
    NetworkSpec spec = network_spec_from_json(j.at("spec"));
    std::vector<Layer> layers;
    for (const auto& l : j.at("layers")) {
      const auto type = l.at("type").get<std::string>();
      if (type == "dense") {
        DenseLayer d;
        d.weights = tensor_from_json(l.at("weights"));
        d.bias = row_from_json(l.at("bias"));
        layers.emplace_back(std::move(d));
      } else if (type == "batchnorm") {
        BatchNormLayer bn;
        bn.gamma = row_from_json(l.at("gamma"));
        bn.beta = row_from_json(l.at("beta"));
        bn.running_mean = row_from_json(l.at("running_mean"));
        bn.running_var = row_from_json(l.at("running_var"));
        bn.momentum = l.at("momentum").get<double>();
        bn.eps = l.at("eps").get<double>();
        bn.steps_seen = l.at("steps_seen").get<std::size_t>();
        layers.emplace_back(std::move(bn));
      } else if (type == "sigmoid") {
        layers.emplace_back(SigmoidLayer{});
      } else {
        throw Error(ErrorCode::kSchemaError, "unknown layer type '" + type + "'");
      }
    }
    model.network = Network::from_layers(std::move(spec), std::move(layers));
    if (!j.at("standardizer").is_null()) model.standardizer = data::standardizer_from_json(j.at("standardizer"));
    for (const auto& r : j.at("training_log")) {
      model.log.push_back({r.at("epoch").get<std::size_t>(), r.at("mean_loss").get<double>(),
                           r.at("train_accuracy").get<double>()});
    }
    model.initial_loss = j.at("initial_loss").get<double>();
    const auto& c = j.at("train_config");
    model.config.batch_size = c.at("batch_size").get<std::size_t>();
    model.config.epochs = c.at("epochs").get<std::size_t>();
    model.config.seed = c.at("seed").get<std::uint64_t>();
    model.config.patience = c.at("patience").get<std::size_t>();
    model.config.adam.lr = c.at("lr").get<double>();
    model.config.adam.beta1 = c.at("beta1").get<double>();
    model.config.adam.beta2 = c.at("beta2").get<double>();
    model.config.adam.eps = c.at("adam_eps").get<double>();
    model.adam_steps = c.at("adam_steps").get<std::size_t>();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("malformed model file: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidSpec) throw Error(ErrorCode::kSchemaError, e.what());
    throw;
  }
}

std::string format_training_log(const std::vector<EpochRecord>& log) {
  std::ostringstream out;
  out << "epoch,mean_loss,train_accuracy\n";
  char buf[128];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", r.epoch, r.mean_loss, r.train_accuracy);
    out << buf;
  }
  return out.str();
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kFileError, "cannot write " + path.string());
  out << to_json(model).dump() << '\n';
  if (!out) throw Error(ErrorCode::kFileError, "failed writing " + path.string());
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kFileError, "cannot open model " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaError, "model file is not valid JSON: " + std::string(e.what()));
  }
  return model_from_json(j);
}

}  // namespace spoc::nn
