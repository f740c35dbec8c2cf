// SPDX-License-Identifier: Apache-2.0
//
// Fidelity, classification and speed measurements comparing the LDA teacher,
// the distilled students and a PCA baseline.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "topicdistill/corpus.hpp"
#include "topicdistill/lda.hpp"
#include "topicdistill/mlp.hpp"

namespace topicdistill::eval {

/// sum_i p_i log(p_i / q_i) with 0 log 0 = 0. DomainError when q_i = 0 < p_i.
double kl_divergence(const TopicMixture& p, const TopicMixture& q);

/// Mean of KL(teacher_d || student_d). DataError("LengthMismatch") when the
/// lists differ in length.
double mean_kl(std::span<const TopicMixture> teacher, std::span<const TopicMixture> student);

// --- PCA --------------------------------------------------------------------

struct PcaModel {
  Eigen::VectorXd mean;           // V
  Eigen::MatrixXd components;     // k x V, orthonormal rows
  Eigen::VectorXd explained;      // variance along each component, non-increasing
  bool rank_deficient = false;    // fewer components than requested
};

/// Top-k principal directions of the mean-centered rows of `data` (one row
/// per document). When the data has rank < k the available components are
/// returned and rank_deficient is set.
PcaModel pca_fit(const Eigen::MatrixXd& data, std::size_t k);

Eigen::VectorXd pca_transform(const PcaModel& model, const Eigen::VectorXd& v);

/// Stacks TF vectors into a dense docs x V matrix.
Eigen::MatrixXd tf_matrix(std::span<const corpus::LabeledDoc> docs, std::size_t vocab_size);

// --- Linear classifier --------------------------------------------------------

struct ClassifierConfig {
  double lambda = 1e-4;
  int epochs = 50;
  std::uint64_t seed = 1;
};

/// One-vs-rest linear SVM. Inputs are standardized with the training mean
/// and standard deviation before scoring.
struct LinearClassifier {
  Eigen::MatrixXd weights;  // C x dim
  Eigen::VectorXd bias;     // C
  std::vector<std::string> labels;
  Eigen::VectorXd feature_mean;
  Eigen::VectorXd feature_scale;  // 1 / std, 1 for constant features

  Eigen::VectorXd margins(const Eigen::VectorXd& x) const;
};

/// Pegasos-style subgradient descent on the L2-regularized hinge loss, one
/// binary problem per class. DataError("SingleClass") with fewer than two
/// distinct labels.
LinearClassifier train_classifier(std::span<const Eigen::VectorXd> vectors, std::span<const std::string> labels,
                                  const ClassifierConfig& config);

/// Label with the largest margin; the lowest class index wins ties.
const std::string& classify(const LinearClassifier& clf, const Eigen::VectorXd& x);

double accuracy(const LinearClassifier& clf, std::span<const Eigen::VectorXd> vectors,
                std::span<const std::string> labels);

/// Fraction of the most frequent label in `labels`.
double majority_baseline(std::span<const std::string> train_labels, std::span<const std::string> test_labels);

// --- Inference speed ----------------------------------------------------------

struct SpeedResult {
  double mean_ratio = 0.0;
  double sd_ratio = 0.0;
  double mean_lda_seconds = 0.0;
  double mean_dnn_seconds = 0.0;
  std::vector<double> ratios;  // one per repetition
  int repetitions = 0;
  int threads = 1;
};

/// Times LDA inference and the student forward pass over the same documents
/// on the calling thread, after one untimed warm-up pass of each. Reports
/// the mean and standard deviation of the per-repetition LDA/DNN ratio.
SpeedResult benchmark_speed(const lda::LdaModel& lda_model, const distill::MlpModel& mlp,
                            std::span<const corpus::TfVector> docs, int repetitions,
                            const lda::InferOptions& infer_options);

// --- Sweep over topic counts ---------------------------------------------------

struct SweepConfig {
  lda::EmOptions lda;  // num_topics is overridden per K
  distill::TrainConfig distill_2l;
  distill::TrainConfig distill_3l;
  distill::InputNorm input_norm = distill::InputNorm::kNone;
  ClassifierConfig classifier;
  int repetitions = 10;
  unsigned threads = 1;  // LDA training only; timing is always single-threaded
};

struct EvalRow {
  std::size_t K = 0;
  double acc_pca = 0.0;
  double acc_lda = 0.0;
  double acc_dnn2l = 0.0;
  double acc_dnn3l = 0.0;
  double kl_2l = 0.0;
  double kl_3l = 0.0;
  SpeedResult speed_2l;
  SpeedResult speed_3l;
};

struct EvalReport {
  std::vector<EvalRow> rows;
};

/// Trained artifacts for one topic count. Thetas are aligned with the
/// dataset's train/test lists.
struct TopicArtifacts {
  lda::LdaModel lda;
  std::vector<TopicMixture> theta_train;
  std::vector<TopicMixture> theta_test;
  distill::MlpModel dnn2l;
  distill::MlpModel dnn3l;
};

/// Distillation pairs from TF vectors and aligned teacher mixtures.
std::vector<distill::TrainingPair> make_pairs(std::span<const corpus::LabeledDoc> docs,
                                              std::span<const TopicMixture> thetas);

/// LDA training, teacher inference on both splits and both student trainings.
TopicArtifacts train_topic_artifacts(const corpus::Dataset& dataset, std::size_t K, const SweepConfig& config);

/// Accuracy and KL columns for one topic count (speed fields left empty).
EvalRow evaluate_topic_count(const corpus::Dataset& dataset, const TopicArtifacts& artifacts,
                             const SweepConfig& config);

/// Fills row.speed_2l / row.speed_3l by timing both students against the
/// teacher on the test split.
void benchmark_topic_count(const corpus::Dataset& dataset, const TopicArtifacts& artifacts,
                           const SweepConfig& config, EvalRow& row);

/// For each K: train LDA, infer thetas, distill 2L and 3L, fit PCA(K), train
/// four classifiers and time inference.
EvalReport run_sweep(const corpus::Dataset& dataset, std::span<const std::size_t> topic_counts,
                     const SweepConfig& config,
                     const std::function<void(const std::string&)>& log = {});

/// report.csv plus accuracy.tsv, kl.tsv and speed.tsv.
void write_report(const EvalReport& report, const std::filesystem::path& dir);

/// The report.csv columns that do not depend on timing, as text.
std::string deterministic_columns(const EvalReport& report);

}  // namespace topicdistill::eval
