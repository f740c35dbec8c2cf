// SPDX-License-Identifier: Apache-2.0
//
// Student networks: tanh MLPs with a softmax output, trained by minibatch SGD
// on the cross entropy against teacher topic mixtures.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "topicdistill/corpus.hpp"
#include "topicdistill/lda.hpp"

namespace topicdistill::distill {

enum class Variant { kTwoLayer, kThreeLayer };

Variant parse_variant(std::string_view text);  // "2l" | "3l"
std::string_view variant_name(Variant v);

enum class InputNorm { kNone, kL1 };

InputNorm parse_input_norm(std::string_view text);  // "none" | "l1"
std::string_view input_norm_name(InputNorm n);

struct MlpArchitecture {
  Variant variant = Variant::kTwoLayer;
  std::size_t input_dim = 0;   // V
  std::size_t output_dim = 0;  // K

  /// TwoLayer: [2K]. ThreeLayer: [3K, 2K].
  std::vector<std::size_t> hidden_dims() const;
  /// V, hidden..., K.
  std::vector<std::size_t> layer_dims() const;
};

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

struct MlpModel {
  MlpArchitecture arch;
  InputNorm input_norm = InputNorm::kNone;
  std::vector<DenseLayer> layers;  // hidden layers then the output layer

  std::size_t num_hidden() const noexcept { return layers.empty() ? 0 : layers.size() - 1; }
  /// Throws DataError if layer shapes do not chain V -> hidden -> K or a
  /// parameter is not finite.
  void validate() const;
};

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
MlpModel init_mlp(const MlpArchitecture& arch, std::uint64_t seed, InputNorm input_norm = InputNorm::kNone);

/// Dense network input for a TF vector, honoring the model's input norm.
Eigen::VectorXd input_vector(const MlpModel& model, const corpus::TfVector& v);

/// Hidden activations (post-tanh) for a dense input, one vector per hidden layer.
std::vector<Eigen::VectorXd> hidden_activations(const MlpModel& model, const Eigen::VectorXd& input);

/// Output logits for a dense input.
Eigen::VectorXd logits(const MlpModel& model, const Eigen::VectorXd& input);

/// Max-subtracted softmax.
TopicMixture softmax(const Eigen::VectorXd& z);

/// f(v; w): densify, tanh hidden layers, softmax output.
/// Throws DimensionMismatch if v indexes past the input dimension.
TopicMixture forward(const MlpModel& model, const corpus::TfVector& v);

/// -sum_i target_i log prediction_i. DomainError if a prediction entry is <= 0.
double cross_entropy(const TopicMixture& target, const TopicMixture& prediction);

/// Cross entropy computed from logits through a fused log-softmax.
double cross_entropy_from_logits(const TopicMixture& target, const Eigen::VectorXd& z);

struct TrainingPair {
  corpus::TfVector input;
  TopicMixture target;
};

/// Same shapes as MlpModel::layers.
struct Gradients {
  std::vector<DenseLayer> layers;
};

/// Mean over the batch of the gradient of the cross entropy. The output
/// pre-activation delta is f(v) - target. `loss`, when given, receives the
/// mean batch loss.
Gradients gradient(const MlpModel& model, std::span<const TrainingPair> batch, double* loss = nullptr);

/// Mean cross entropy over a set of pairs (0 for an empty set).
double mean_loss(const MlpModel& model, std::span<const TrainingPair> pairs);

struct TrainConfig {
  double learning_rate = 0.05;
  int epochs = 100;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  double lr_decay = 0.98;  // multiplied into the rate after each epoch
  bool shuffle = true;
  double momentum = 0.0;
  double weight_decay = 0.0;

  void validate() const;
};

struct TrainResult {
  MlpModel model;
  std::vector<double> train_loss;       // mean over the training set after each epoch
  std::vector<double> validation_loss;  // empty when no validation pairs were given
};

/// Plain minibatch SGD, w <- w - lr * g (optionally with momentum and L2
/// weight decay on the weights). Deterministic given config.seed. Throws
/// NumericError("DivergenceError") when the training loss stops being finite.
TrainResult train_sgd(MlpModel model, std::span<const TrainingPair> train_pairs, const TrainConfig& config,
                      std::span<const TrainingPair> validation_pairs = {});

/// {version, variant, V, K, input_norm, layers: [{rows, cols, weights, bias}]}.
void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace topicdistill::distill
