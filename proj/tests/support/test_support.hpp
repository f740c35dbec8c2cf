// SPDX-License-Identifier: Apache-2.0
//
// Helpers shared by the unit tests and the acceptance harness. Everything
// here is written independently of the library internals: generators sample
// straight from textbook definitions and the oracles recompute quantities
// with plain loops.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "topicdistill/corpus.hpp"
#include "topicdistill/lda.hpp"
#include "topicdistill/mlp.hpp"

namespace tdtest {

namespace fs = std::filesystem;
namespace td = topicdistill;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("topicdistill_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

inline std::vector<double> sample_dirichlet(std::mt19937_64& rng, const std::vector<double>& alpha) {
  std::vector<double> out(alpha.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    std::gamma_distribution<double> g(alpha[i], 1.0);
    out[i] = g(rng);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t k) {
  return sample_dirichlet(rng, std::vector<double>(k, 1.0));
}

/// Random LDA model with Dirichlet(concentration) topic rows.
inline td::lda::LdaModel random_lda(std::mt19937_64& rng, std::size_t K, std::size_t V, double alpha,
                                    double concentration = 0.5) {
  Eigen::MatrixXd log_beta(K, V);
  for (std::size_t i = 0; i < K; ++i) {
    auto row = sample_dirichlet(rng, std::vector<double>(V, concentration));
    for (std::size_t w = 0; w < V; ++w) log_beta(i, w) = std::log(std::max(row[w], 1e-300));
    // Renormalize in log space so rows sum to one at double precision.
    const double lse = std::log(log_beta.row(i).array().exp().sum());
    log_beta.row(i).array() -= lse;
  }
  return td::lda::LdaModel(std::vector<double>(K, alpha), log_beta);
}

inline td::corpus::TfVector random_doc(std::mt19937_64& rng, std::size_t V, std::size_t length) {
  std::uniform_int_distribution<std::uint32_t> word(0, static_cast<std::uint32_t>(V - 1));
  std::vector<td::corpus::TfVector::Entry> entries;
  for (std::size_t n = 0; n < length; ++n) entries.emplace_back(word(rng), 1u);
  return td::corpus::TfVector(std::move(entries));
}

/// Documents drawn from the LDA generative process.
struct SyntheticLda {
  std::vector<std::vector<double>> beta;   // K x V
  std::vector<std::vector<double>> theta;  // per document
  std::vector<td::corpus::TfVector> docs;
};

inline SyntheticLda sample_lda_corpus(std::uint64_t seed, std::size_t K, std::size_t V, std::size_t num_docs,
                                      std::size_t length, double alpha, double eta) {
  std::mt19937_64 rng(seed);
  SyntheticLda out;
  for (std::size_t i = 0; i < K; ++i) out.beta.push_back(sample_dirichlet(rng, std::vector<double>(V, eta)));
  for (std::size_t d = 0; d < num_docs; ++d) {
    auto theta = sample_dirichlet(rng, std::vector<double>(K, alpha));
    std::discrete_distribution<std::size_t> pick_topic(theta.begin(), theta.end());
    std::vector<td::corpus::TfVector::Entry> entries;
    for (std::size_t n = 0; n < length; ++n) {
      const std::size_t z = pick_topic(rng);
      std::discrete_distribution<std::uint32_t> pick_word(out.beta[z].begin(), out.beta[z].end());
      entries.emplace_back(pick_word(rng), 1u);
    }
    out.theta.push_back(std::move(theta));
    out.docs.emplace_back(std::move(entries));
  }
  return out;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

/// Mean row cosine between true and learned topics under the best row
/// permutation, found by exhaustive search.
inline double best_permutation_cosine(const std::vector<std::vector<double>>& truth, const Eigen::MatrixXd& beta) {
  const std::size_t K = truth.size();
  std::vector<std::vector<double>> learned(K);
  for (std::size_t i = 0; i < K; ++i)
    for (Eigen::Index w = 0; w < beta.cols(); ++w) learned[i].push_back(beta(i, w));
  std::vector<std::size_t> perm(K);
  std::iota(perm.begin(), perm.end(), 0);
  double best = -1.0;
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < K; ++i) total += cosine(truth[i], learned[perm[i]]);
    best = std::max(best, total / static_cast<double>(K));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Log-loss of the network computed with straightforward loops, used as the
/// objective for finite differences. Mirrors the textbook definition: tanh
/// hidden layers, softmax output, mean cross-entropy over the batch.
inline double reference_loss(const td::distill::MlpModel& model,
                             const std::vector<td::distill::TrainingPair>& batch) {
  double total = 0.0;
  for (const auto& pair : batch) {
    std::vector<double> a(model.arch.input_dim, 0.0);
    for (const auto& [w, c] : pair.input.entries()) a[w] = c;
    if (model.input_norm == td::distill::InputNorm::kL1 && pair.input.total() > 0) {
      for (double& x : a) x /= static_cast<double>(pair.input.total());
    }
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      const auto& layer = model.layers[l];
      std::vector<double> z(layer.weights.rows());
      for (Eigen::Index j = 0; j < layer.weights.rows(); ++j) {
        double s = layer.bias(j);
        for (Eigen::Index k = 0; k < layer.weights.cols(); ++k) s += layer.weights(j, k) * a[k];
        z[j] = s;
      }
      if (l + 1 < model.layers.size()) {
        for (double& x : z) x = std::tanh(x);
      }
      a = std::move(z);
    }
    const double m = *std::max_element(a.begin(), a.end());
    double sum = 0.0;
    for (double x : a) sum += std::exp(x - m);
    const double log_norm = m + std::log(sum);
    for (std::size_t i = 0; i < a.size(); ++i) total -= pair.target.theta[i] * (a[i] - log_norm);
  }
  return total / static_cast<double>(batch.size());
}

struct GradientCheck {
  double max_rel_error = 0.0;
  std::size_t parameters = 0;
};

/// Compares analytic gradients to central differences of reference_loss.
/// Relative error is |a - n| / max(|a|, |n|, floor); the floor only matters
/// for entries that are zero up to rounding on both sides.
inline GradientCheck check_gradient(const td::distill::MlpModel& model,
                                    const std::vector<td::distill::TrainingPair>& batch, double step = 1e-5,
                                    double floor = 1e-7) {
  const auto analytic = td::distill::gradient(model, batch);
  GradientCheck result;
  td::distill::MlpModel probe = model;
  auto rel = [&](double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor}); };
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto& W = probe.layers[l].weights;
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
      for (Eigen::Index c = 0; c < W.cols(); ++c) {
        const double saved = W(r, c);
        W(r, c) = saved + step;
        const double up = reference_loss(probe, batch);
        W(r, c) = saved - step;
        const double down = reference_loss(probe, batch);
        W(r, c) = saved;
        const double numeric = (up - down) / (2.0 * step);
        result.max_rel_error = std::max(result.max_rel_error, rel(analytic.layers[l].weights(r, c), numeric));
        ++result.parameters;
      }
    }
    auto& b = probe.layers[l].bias;
    for (Eigen::Index r = 0; r < b.size(); ++r) {
      const double saved = b(r);
      b(r) = saved + step;
      const double up = reference_loss(probe, batch);
      b(r) = saved - step;
      const double down = reference_loss(probe, batch);
      b(r) = saved;
      const double numeric = (up - down) / (2.0 * step);
      result.max_rel_error = std::max(result.max_rel_error, rel(analytic.layers[l].bias(r), numeric));
      ++result.parameters;
    }
  }
  return result;
}

/// Random small network with weights scaled up so that tanh units are not
/// all in their linear regime.
inline td::distill::MlpModel random_mlp(td::distill::Variant variant, std::size_t V, std::size_t K,
                                        std::uint64_t seed) {
  auto model = td::distill::init_mlp({variant, V, K}, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto& layer : model.layers) {
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = u(rng);
  }
  return model;
}

inline std::vector<td::distill::TrainingPair> random_pairs(std::mt19937_64& rng, std::size_t V, std::size_t K,
                                                           std::size_t count, std::size_t length) {
  std::vector<td::distill::TrainingPair> pairs;
  for (std::size_t i = 0; i < count; ++i) {
    pairs.push_back({random_doc(rng, V, length), td::TopicMixture{random_simplex(rng, K)}});
  }
  return pairs;
}

}  // namespace tdtest
