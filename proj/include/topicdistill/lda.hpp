// SPDX-License-Identifier: Apache-2.0
//
// Latent Dirichlet allocation: mean-field variational inference for a single
// document and variational EM over a corpus.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "topicdistill/corpus.hpp"

namespace topicdistill {

/// A point on the K-simplex.
struct TopicMixture {
  std::vector<double> theta;

  std::size_t size() const noexcept { return theta.size(); }
  double operator[](std::size_t i) const { return theta[i]; }
  friend bool operator==(const TopicMixture&, const TopicMixture&) = default;
};

namespace lda {

/// Topic count K, symmetric or asymmetric prior alpha and the K x V topic-word
/// log probabilities. beta() caches exp(log_beta) for the inference loop.
class LdaModel {
 public:
  LdaModel() = default;
  /// Throws DataError unless K >= 2, every alpha > 0, log_beta has K rows
  /// and every exp(log_beta) row sums to one within 1e-8.
  LdaModel(std::vector<double> alpha, Eigen::MatrixXd log_beta);

  std::size_t num_topics() const noexcept { return alpha_.size(); }
  std::size_t vocab_size() const noexcept { return static_cast<std::size_t>(log_beta_.cols()); }
  const std::vector<double>& alpha() const noexcept { return alpha_; }
  const Eigen::MatrixXd& log_beta() const noexcept { return log_beta_; }
  const Eigen::MatrixXd& beta() const noexcept { return beta_; }

 private:
  std::vector<double> alpha_;
  Eigen::MatrixXd log_beta_;
  Eigen::MatrixXd beta_;
};

using PhiMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-document variational parameters. phi has one row per distinct word of
/// the document, aligned with TfVector::entries().
struct VariationalState {
  std::vector<double> gamma;
  PhiMatrix phi;
  int iterations = 0;
  bool converged = false;
};

struct InferOptions {
  double tol = 1e-5;  // on the mean absolute change of gamma
  int max_iter = 100;
};

/// gamma = alpha + total/K, phi uniform.
VariationalState initial_state(const LdaModel& model, const corpus::TfVector& doc);

/// One coordinate-ascent sweep: every phi row from the current gamma, then
/// gamma = alpha + sum_n count_n phi_n. Returns mean |delta gamma|.
double sweep(const LdaModel& model, const corpus::TfVector& doc, VariationalState& state);

/// Runs sweeps from the standard initialization until the mean absolute
/// gamma change drops below tol or max_iter sweeps have run.
/// Throws DimensionMismatch if the document indexes past V.
VariationalState infer(const LdaModel& model, const corpus::TfVector& doc, const InferOptions& options);

/// Same, starting from a caller-supplied gamma (used for EM warm starts).
VariationalState infer_from(const LdaModel& model, const corpus::TfVector& doc,
                            std::vector<double> gamma, const InferOptions& options);

TopicMixture estimate_theta(std::span<const double> gamma);

/// Inference followed by estimate_theta.
TopicMixture infer_theta(const LdaModel& model, const corpus::TfVector& doc, const InferOptions& options);

/// Evidence lower bound on log p(doc | alpha, beta) at the given state.
double elbo(const LdaModel& model, const corpus::TfVector& doc, const VariationalState& state);

enum class BetaInit { kUniform, kRandom };

struct EmOptions {
  std::size_t num_topics = 10;
  double alpha = 0.0;  // symmetric prior; <= 0 selects 50/K
  double em_tol = 1e-4;
  int em_max_iter = 50;
  InferOptions e_step;
  BetaInit init = BetaInit::kRandom;
  std::uint64_t seed = 1;
  double smoothing = 1e-3;  // pseudo-count per (topic, word) in the M-step
  unsigned threads = 1;
};

struct EmIteration {
  double elbo = 0.0;  // penalized corpus bound, see train_em
  double relative_change = 0.0;
};

struct EmResult {
  LdaModel model;
  std::vector<EmIteration> history;
  bool converged = false;
};

/// Variational EM with fixed symmetric alpha. Each E-step warm-starts a
/// document from its previous gamma; the M-step sets beta proportional to
/// the expected counts plus `smoothing`. The tracked objective is the corpus
/// ELBO plus smoothing * sum(log beta), the quantity this M-step maximizes,
/// so it never decreases. Stops once the relative improvement is below
/// em_tol. The E-step runs on `threads` workers; accumulation happens in
/// document order so the result does not depend on the worker count.
EmResult train_em(std::span<const corpus::TfVector> docs, std::size_t vocab_size, const EmOptions& options,
                  const std::function<void(int, const EmIteration&)>& on_iteration = {});

/// Serialized as {version, K, V, alpha, log_beta (row-major)}.
void save_model(const LdaModel& model, const std::filesystem::path& path);
LdaModel load_model(const std::filesystem::path& path);

}  // namespace lda
}  // namespace topicdistill
