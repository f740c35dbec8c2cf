// SPDX-License-Identifier: Apache-2.0
#include "topicdistill/mlp.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include <nlohmann/json.hpp>

#include "topicdistill/error.hpp"
#include "topicdistill/rng.hpp"

namespace topicdistill::distill {

namespace {

constexpr int kModelVersion = 1;

using SparseInput = std::vector<std::pair<std::uint32_t, double>>;

void check_input(const MlpModel& model, const corpus::TfVector& v) {
  if (v.dimension_bound() > model.arch.input_dim) {
    throw dimension_mismatch("TF vector indexes word " + std::to_string(v.dimension_bound() - 1) +
                             " but the network input has " + std::to_string(model.arch.input_dim) + " units");
  }
}

double input_scale(const MlpModel& model, const corpus::TfVector& v) {
  if (model.input_norm == InputNorm::kL1 && v.total() > 0) return 1.0 / static_cast<double>(v.total());
  return 1.0;
}

SparseInput sparse_input(const MlpModel& model, const corpus::TfVector& v) {
  check_input(model, v);
  const double scale = input_scale(model, v);
  SparseInput out;
  out.reserve(v.nnz());
  for (const auto& [index, count] : v.entries()) out.emplace_back(index, scale * static_cast<double>(count));
  return out;
}

void check_distribution(const TopicMixture& p, std::size_t K, const char* what) {
  if (p.size() != K) {
    throw dimension_mismatch(std::string(what) + " has " + std::to_string(p.size()) + " entries, expected " +
                             std::to_string(K));
  }
}

}  // namespace

Variant parse_variant(std::string_view text) {
  if (text == "2l" || text == "2L") return Variant::kTwoLayer;
  if (text == "3l" || text == "3L") return Variant::kThreeLayer;
  throw DataError("InvalidArgument", "unknown variant '" + std::string(text) + "' (expected 2l or 3l)");
}

std::string_view variant_name(Variant v) { return v == Variant::kTwoLayer ? "2l" : "3l"; }

InputNorm parse_input_norm(std::string_view text) {
  if (text == "none") return InputNorm::kNone;
  if (text == "l1") return InputNorm::kL1;
  throw DataError("InvalidArgument", "unknown input norm '" + std::string(text) + "' (expected none or l1)");
}

std::string_view input_norm_name(InputNorm n) { return n == InputNorm::kNone ? "none" : "l1"; }

std::vector<std::size_t> MlpArchitecture::hidden_dims() const {
  if (variant == Variant::kTwoLayer) return {2 * output_dim};
  return {3 * output_dim, 2 * output_dim};
}

std::vector<std::size_t> MlpArchitecture::layer_dims() const {
  std::vector<std::size_t> dims{input_dim};
  for (auto h : hidden_dims()) dims.push_back(h);
  dims.push_back(output_dim);
  return dims;
}

void MlpModel::validate() const {
  if (arch.input_dim < 1 || arch.output_dim < 1) throw DataError("InvalidModel", "network dimensions must be >= 1");
  const auto dims = arch.layer_dims();
  if (layers.size() + 1 != dims.size()) {
    throw dimension_mismatch("expected " + std::to_string(dims.size() - 1) + " layers, found " +
                             std::to_string(layers.size()));
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (static_cast<std::size_t>(layer.weights.rows()) != dims[l + 1] ||
        static_cast<std::size_t>(layer.weights.cols()) != dims[l] ||
        static_cast<std::size_t>(layer.bias.size()) != dims[l + 1]) {
      throw dimension_mismatch("layer " + std::to_string(l) + " does not chain " + std::to_string(dims[l]) +
                               " -> " + std::to_string(dims[l + 1]));
    }
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
      throw DataError("InvalidModel", "layer " + std::to_string(l) + " has non-finite parameters");
    }
  }
}

MlpModel init_mlp(const MlpArchitecture& arch, std::uint64_t seed, InputNorm input_norm) {
  MlpModel model;
  model.arch = arch;
  model.input_norm = input_norm;
  if (arch.input_dim < 1 || arch.output_dim < 1) throw DataError("InvalidModel", "network dimensions must be >= 1");
  Rng rng(seed);
  const auto dims = arch.layer_dims();
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(dims[l]);
    const auto out = static_cast<Eigen::Index>(dims[l + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) layer.weights(r, c) = uniform(rng, -limit, limit);
    }
    model.layers.push_back(std::move(layer));
  }
  return model;
}

Eigen::VectorXd input_vector(const MlpModel& model, const corpus::TfVector& v) {
  check_input(model, v);
  const double scale = input_scale(model, v);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.arch.input_dim));
  for (const auto& [index, count] : v.entries()) x[index] = scale * static_cast<double>(count);
  return x;
}

std::vector<Eigen::VectorXd> hidden_activations(const MlpModel& model, const Eigen::VectorXd& input) {
  std::vector<Eigen::VectorXd> out;
  Eigen::VectorXd h = input;
  for (std::size_t l = 0; l < model.num_hidden(); ++l) {
    h = (model.layers[l].weights * h + model.layers[l].bias).array().tanh().matrix();
    out.push_back(h);
  }
  return out;
}

Eigen::VectorXd logits(const MlpModel& model, const Eigen::VectorXd& input) {
  if (static_cast<std::size_t>(input.size()) != model.arch.input_dim) {
    throw dimension_mismatch("dense input has " + std::to_string(input.size()) + " entries");
  }
  Eigen::VectorXd h = input;
  for (std::size_t l = 0; l < model.num_hidden(); ++l) {
    h = (model.layers[l].weights * h + model.layers[l].bias).array().tanh().matrix();
  }
  const auto& out = model.layers.back();
  return out.weights * h + out.bias;
}

TopicMixture softmax(const Eigen::VectorXd& z) {
  const Eigen::ArrayXd e = (z.array() - z.maxCoeff()).exp();
  const double sum = e.sum();
  TopicMixture p;
  p.theta.resize(static_cast<std::size_t>(z.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) p.theta[static_cast<std::size_t>(i)] = e[i] / sum;
  return p;
}

TopicMixture forward(const MlpModel& model, const corpus::TfVector& v) {
  return softmax(logits(model, input_vector(model, v)));
}

double cross_entropy(const TopicMixture& target, const TopicMixture& prediction) {
  check_distribution(prediction, target.size(), "prediction");
  double loss = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (!(prediction[i] > 0.0)) {
      throw domain_error("prediction entry " + std::to_string(i) + " is not positive");
    }
    if (target[i] != 0.0) loss -= target[i] * std::log(prediction[i]);
  }
  return loss;
}

double cross_entropy_from_logits(const TopicMixture& target, const Eigen::VectorXd& z) {
  check_distribution(target, static_cast<std::size_t>(z.size()), "target");
  const double m = z.maxCoeff();
  const double log_norm = m + std::log((z.array() - m).exp().sum());
  double loss = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] != 0.0) loss -= target[i] * (z[static_cast<Eigen::Index>(i)] - log_norm);
  }
  return loss;
}

Gradients gradient(const MlpModel& model, std::span<const TrainingPair> batch, double* loss) {
  if (batch.empty()) throw DataError("InvalidArgument", "gradient needs a non-empty batch");
  const std::size_t L = model.layers.size();
  const std::size_t K = model.arch.output_dim;

  Gradients g;
  g.layers.reserve(L);
  for (const auto& layer : model.layers) {
    g.layers.push_back({Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()),
                        Eigen::VectorXd::Zero(layer.bias.size())});
  }

  std::vector<Eigen::VectorXd> act(L);  // act[l] = output of layer l (post tanh for hidden)
  double total_loss = 0.0;
  for (const auto& pair : batch) {
    check_distribution(pair.target, K, "target");
    const SparseInput x = sparse_input(model, pair.input);

    // The first layer reads the sparse input column by column.
    Eigen::VectorXd z = model.layers[0].bias;
    for (const auto& [index, value] : x) z.noalias() += value * model.layers[0].weights.col(index);
    for (std::size_t l = 0; l < L; ++l) {
      if (l > 0) z = model.layers[l].weights * act[l - 1] + model.layers[l].bias;
      act[l] = l + 1 < L ? Eigen::VectorXd(z.array().tanh().matrix()) : z;
    }

    total_loss += cross_entropy_from_logits(pair.target, act[L - 1]);
    const TopicMixture f = softmax(act[L - 1]);
    Eigen::VectorXd delta(static_cast<Eigen::Index>(K));
    for (std::size_t i = 0; i < K; ++i) delta[static_cast<Eigen::Index>(i)] = f[i] - pair.target[i];

    for (std::size_t l = L; l-- > 0;) {
      g.layers[l].bias += delta;
      if (l == 0) {
        for (const auto& [index, value] : x) g.layers[0].weights.col(index).noalias() += value * delta;
        break;
      }
      g.layers[l].weights.noalias() += delta * act[l - 1].transpose();
      Eigen::VectorXd back = model.layers[l].weights.transpose() * delta;
      delta = back.cwiseProduct((1.0 - act[l - 1].array().square()).matrix());
    }
  }

  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& layer : g.layers) {
    layer.weights *= inv;
    layer.bias *= inv;
  }
  if (loss) *loss = total_loss * inv;
  return g;
}

double mean_loss(const MlpModel& model, std::span<const TrainingPair> pairs) {
  if (pairs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& p : pairs) total += cross_entropy_from_logits(p.target, logits(model, input_vector(model, p.input)));
  return total / static_cast<double>(pairs.size());
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw DataError("InvalidArgument", "learning_rate must be > 0");
  if (epochs < 1) throw DataError("InvalidArgument", "epochs must be >= 1");
  if (batch_size < 1) throw DataError("InvalidArgument", "batch_size must be >= 1");
  if (!(lr_decay > 0.0)) throw DataError("InvalidArgument", "lr_decay must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) throw DataError("InvalidArgument", "momentum must be in [0, 1)");
  if (weight_decay < 0.0) throw DataError("InvalidArgument", "weight_decay must be >= 0");
}

TrainResult train_sgd(MlpModel model, std::span<const TrainingPair> train_pairs, const TrainConfig& config,
                      std::span<const TrainingPair> validation_pairs) {
  config.validate();
  model.validate();
  if (train_pairs.empty()) throw DataError("EmptyDataset", "train_sgd needs at least one training pair");

  Rng rng(config.seed);
  std::vector<std::size_t> order(train_pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<TrainingPair> batch;
  batch.reserve(config.batch_size);

  std::vector<DenseLayer> velocity;
  if (config.momentum > 0.0) {
    for (const auto& layer : model.layers) {
      velocity.push_back({Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()),
                          Eigen::VectorXd::Zero(layer.bias.size())});
    }
  }

  TrainResult result;
  double lr = config.learning_rate;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle) shuffle(std::span<std::size_t>(order), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      batch.clear();
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      for (std::size_t i = start; i < end; ++i) batch.push_back(train_pairs[order[i]]);
      Gradients g = gradient(model, batch);
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        auto& layer = model.layers[l];
        auto& grad = g.layers[l];
        if (config.weight_decay > 0.0) grad.weights += config.weight_decay * layer.weights;
        if (config.momentum > 0.0) {
          velocity[l].weights = config.momentum * velocity[l].weights - lr * grad.weights;
          velocity[l].bias = config.momentum * velocity[l].bias - lr * grad.bias;
          layer.weights += velocity[l].weights;
          layer.bias += velocity[l].bias;
        } else {
          layer.weights -= lr * grad.weights;
          layer.bias -= lr * grad.bias;
        }
      }
    }
    const double train_loss = mean_loss(model, train_pairs);
    if (!std::isfinite(train_loss)) {
      throw NumericError("DivergenceError", "training loss became non-finite at epoch " + std::to_string(epoch + 1));
    }
    result.train_loss.push_back(train_loss);
    if (!validation_pairs.empty()) result.validation_loss.push_back(mean_loss(model, validation_pairs));
    lr *= config.lr_decay;
  }
  result.model = std::move(model);
  return result;
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : model.layers) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(layer.weights.size()));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) w.push_back(layer.weights(r, c));
    }
    layers.push_back({{"rows", layer.weights.rows()},
                      {"cols", layer.weights.cols()},
                      {"weights", std::move(w)},
                      {"bias", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())}});
  }
  nlohmann::json j = {
      {"version", kModelVersion},
      {"variant", variant_name(model.arch.variant)},
      {"V", model.arch.input_dim},
      {"K", model.arch.output_dim},
      {"input_norm", input_norm_name(model.input_norm)},
      {"layers", std::move(layers)},
  };
  std::ofstream out(path);
  if (!out) throw DataError("IoError", "cannot write " + path.string());
  out << j.dump() << '\n';
}

MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("IoError", "cannot open " + path.string());
  MlpModel model;
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("version").get<int>() != kModelVersion) {
      throw DataError("UnsupportedVersion", path.string() + " has model version " + j.at("version").dump());
    }
    model.arch.variant = parse_variant(j.at("variant").get<std::string>());
    model.arch.input_dim = j.at("V").get<std::size_t>();
    model.arch.output_dim = j.at("K").get<std::size_t>();
    model.input_norm = parse_input_norm(j.value("input_norm", std::string("none")));
    for (const auto& jl : j.at("layers")) {
      const auto rows = jl.at("rows").get<Eigen::Index>();
      const auto cols = jl.at("cols").get<Eigen::Index>();
      const auto w = jl.at("weights").get<std::vector<double>>();
      const auto b = jl.at("bias").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows) {
        throw dimension_mismatch(path.string() + ": layer arrays disagree with rows/cols");
      }
      DenseLayer layer{Eigen::MatrixXd(rows, cols), Eigen::Map<const Eigen::VectorXd>(b.data(), rows)};
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) layer.weights(r, c) = w[static_cast<std::size_t>(r * cols + c)];
      }
      model.layers.push_back(std::move(layer));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
  model.validate();
  return model;
}

}  // namespace topicdistill::distill
