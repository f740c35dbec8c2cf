// SPDX-License-Identifier: Apache-2.0
#include "topicdistill/lda.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>

#include <nlohmann/json.hpp>

#include "topicdistill/error.hpp"
#include "topicdistill/parallel.hpp"
#include "topicdistill/rng.hpp"
#include "topicdistill/special.hpp"

namespace topicdistill::lda {

namespace {

constexpr int kModelVersion = 1;

void check_document(const LdaModel& model, const corpus::TfVector& doc) {
  if (doc.dimension_bound() > model.vocab_size()) {
    throw dimension_mismatch("document references word " + std::to_string(doc.dimension_bound() - 1) +
                             " but the model has V = " + std::to_string(model.vocab_size()));
  }
}

}  // namespace

LdaModel::LdaModel(std::vector<double> alpha, Eigen::MatrixXd log_beta)
    : alpha_(std::move(alpha)), log_beta_(std::move(log_beta)) {
  if (alpha_.size() < 2) throw DataError("InvalidModel", "LDA needs K >= 2 topics");
  for (double a : alpha_) {
    if (!(a > 0.0) || !std::isfinite(a)) throw DataError("InvalidModel", "alpha entries must be positive");
  }
  if (static_cast<std::size_t>(log_beta_.rows()) != alpha_.size() || log_beta_.cols() < 1) {
    throw dimension_mismatch("log_beta must be K x V with K = " + std::to_string(alpha_.size()));
  }
  beta_ = log_beta_.array().exp().matrix();
  for (Eigen::Index i = 0; i < beta_.rows(); ++i) {
    const double sum = beta_.row(i).sum();
    if (!(std::abs(sum - 1.0) <= 1e-8)) {
      throw DataError("InvalidModel", "topic " + std::to_string(i) + " sums to " + std::to_string(sum));
    }
  }
}

VariationalState initial_state(const LdaModel& model, const corpus::TfVector& doc) {
  check_document(model, doc);
  const std::size_t K = model.num_topics();
  VariationalState state;
  state.gamma.resize(K);
  const double share = static_cast<double>(doc.total()) / static_cast<double>(K);
  for (std::size_t i = 0; i < K; ++i) state.gamma[i] = model.alpha()[i] + share;
  state.phi = PhiMatrix::Constant(static_cast<Eigen::Index>(doc.nnz()), static_cast<Eigen::Index>(K),
                                  1.0 / static_cast<double>(K));
  return state;
}

double sweep(const LdaModel& model, const corpus::TfVector& doc, VariationalState& state) {
  const auto K = static_cast<Eigen::Index>(model.num_topics());
  const auto& alpha = model.alpha();
  const auto& beta = model.beta();

  Eigen::VectorXd log_weight(K);
  for (Eigen::Index i = 0; i < K; ++i) log_weight[i] = digamma(state.gamma[i]);
  const Eigen::VectorXd weight = (log_weight.array() - log_weight.maxCoeff()).exp().matrix();

  Eigen::VectorXd next = Eigen::Map<const Eigen::VectorXd>(alpha.data(), K);
  Eigen::VectorXd row(K);
  const auto& entries = doc.entries();
  for (std::size_t n = 0; n < entries.size(); ++n) {
    const auto [word, count] = entries[n];
    row = weight.cwiseProduct(beta.col(word));
    double norm = row.sum();
    if (!(norm > std::numeric_limits<double>::min()) || !std::isfinite(norm)) {
      // Every topic assigns this word ~0 probability; normalize in log space.
      row = log_weight + model.log_beta().col(word);
      row = (row.array() - row.maxCoeff()).exp().matrix();
      norm = row.sum();
    }
    row /= norm;
    state.phi.row(static_cast<Eigen::Index>(n)) = row.transpose();
    next.noalias() += static_cast<double>(count) * row;
  }

  double change = 0.0;
  for (Eigen::Index i = 0; i < K; ++i) {
    change += std::abs(next[i] - state.gamma[i]);
    state.gamma[i] = next[i];
  }
  ++state.iterations;
  return change / static_cast<double>(K);
}

namespace {

VariationalState run_sweeps(const LdaModel& model, const corpus::TfVector& doc, VariationalState state,
                            const InferOptions& options) {
  if (!(options.tol > 0.0) || options.max_iter < 1) {
    throw DataError("InvalidArgument", "infer needs tol > 0 and max_iter >= 1");
  }
  if (doc.empty()) {
    // No words: the fixed point is gamma = alpha.
    state.gamma = model.alpha();
    state.converged = true;
    return state;
  }
  while (state.iterations < options.max_iter) {
    if (sweep(model, doc, state) < options.tol) {
      state.converged = true;
      break;
    }
  }
  return state;
}

}  // namespace

VariationalState infer_from(const LdaModel& model, const corpus::TfVector& doc, std::vector<double> gamma,
                            const InferOptions& options) {
  VariationalState state = initial_state(model, doc);
  if (gamma.size() != model.num_topics()) throw dimension_mismatch("warm-start gamma has the wrong length");
  state.gamma = std::move(gamma);
  return run_sweeps(model, doc, std::move(state), options);
}

VariationalState infer(const LdaModel& model, const corpus::TfVector& doc, const InferOptions& options) {
  return run_sweeps(model, doc, initial_state(model, doc), options);
}

TopicMixture estimate_theta(std::span<const double> gamma) {
  TopicMixture out;
  out.theta.assign(gamma.begin(), gamma.end());
  const double sum = std::accumulate(gamma.begin(), gamma.end(), 0.0);
  for (double& t : out.theta) t /= sum;
  return out;
}

TopicMixture infer_theta(const LdaModel& model, const corpus::TfVector& doc, const InferOptions& options) {
  return estimate_theta(infer(model, doc, options).gamma);
}

double elbo(const LdaModel& model, const corpus::TfVector& doc, const VariationalState& state) {
  const std::size_t K = model.num_topics();
  const auto& alpha = model.alpha();
  const auto& gamma = state.gamma;
  if (gamma.size() != K || static_cast<std::size_t>(state.phi.rows()) != doc.nnz()) {
    throw dimension_mismatch("variational state does not match the document");
  }

  const double gamma_sum = std::accumulate(gamma.begin(), gamma.end(), 0.0);
  const double alpha_sum = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  const double dig_sum = digamma(gamma_sum);
  std::vector<double> elog_theta(K);
  for (std::size_t i = 0; i < K; ++i) elog_theta[i] = digamma(gamma[i]) - dig_sum;

  // E[log p(theta | alpha)] - E[log q(theta | gamma)]
  double bound = std::lgamma(alpha_sum) - std::lgamma(gamma_sum);
  for (std::size_t i = 0; i < K; ++i) {
    bound += std::lgamma(gamma[i]) - std::lgamma(alpha[i]) + (alpha[i] - gamma[i]) * elog_theta[i];
  }

  // E[log p(z | theta)] + E[log p(w | z, beta)] - E[log q(z | phi)]
  const auto& log_beta = model.log_beta();
  const auto& entries = doc.entries();
  for (std::size_t n = 0; n < entries.size(); ++n) {
    const auto [word, count] = entries[n];
    double term = 0.0;
    for (std::size_t i = 0; i < K; ++i) {
      const double p = state.phi(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(i));
      if (p > 0.0) term += p * (elog_theta[i] + log_beta(static_cast<Eigen::Index>(i), word) - std::log(p));
    }
    bound += static_cast<double>(count) * term;
  }
  return bound;
}

EmResult train_em(std::span<const corpus::TfVector> docs, std::size_t vocab_size, const EmOptions& options,
                  const std::function<void(int, const EmIteration&)>& on_iteration) {
  const std::size_t K = options.num_topics;
  if (K < 2) throw DataError("InvalidArgument", "train_em needs K >= 2");
  if (docs.empty()) throw DataError("EmptyDataset", "train_em needs at least one document");
  if (vocab_size == 0) throw DataError("InvalidArgument", "vocabulary is empty");
  if (!(options.smoothing > 0.0)) throw DataError("InvalidArgument", "smoothing must be positive");
  for (const auto& d : docs) {
    if (d.dimension_bound() > vocab_size) throw dimension_mismatch("document indexes past V");
  }
  const double alpha = options.alpha > 0.0 ? options.alpha : 50.0 / static_cast<double>(K);
  const auto Ki = static_cast<Eigen::Index>(K);
  const auto Vi = static_cast<Eigen::Index>(vocab_size);

  Eigen::MatrixXd beta(Ki, Vi);
  if (options.init == BetaInit::kUniform) {
    beta.setConstant(1.0 / static_cast<double>(vocab_size));
  } else {
    Rng rng(options.seed);
    for (Eigen::Index i = 0; i < Ki; ++i) {
      for (Eigen::Index w = 0; w < Vi; ++w) beta(i, w) = uniform01(rng) + 1.0 / static_cast<double>(vocab_size);
    }
  }
  auto normalized_log = [](Eigen::MatrixXd m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double sum = m.row(i).sum();
      if (!(sum > 0.0) || !std::isfinite(sum)) {
        throw NumericError("DegenerateTopic", "topic " + std::to_string(i) + " received no mass");
      }
      m.row(i) /= sum;
    }
    return Eigen::MatrixXd(m.array().log().matrix());
  };

  EmResult result;
  result.model = LdaModel(std::vector<double>(K, alpha), normalized_log(std::move(beta)));

  std::vector<std::vector<double>> gammas(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) gammas[d] = initial_state(result.model, docs[d]).gamma;
  std::vector<VariationalState> states(docs.size());
  std::vector<double> doc_elbo(docs.size());

  for (int iter = 0; iter < options.em_max_iter; ++iter) {
    const LdaModel& model = result.model;
    parallel_for(docs.size(), options.threads, [&](std::size_t d) {
      states[d] = infer_from(model, docs[d], gammas[d], options.e_step);
      doc_elbo[d] = elbo(model, docs[d], states[d]);
    });

    EmIteration it;
    it.elbo = options.smoothing * model.log_beta().sum();
    for (double e : doc_elbo) it.elbo += e;
    if (!std::isfinite(it.elbo)) throw NumericError("DivergenceError", "corpus ELBO is not finite");
    if (!result.history.empty()) {
      const double prev = result.history.back().elbo;
      it.relative_change = (it.elbo - prev) / std::abs(prev);
    }
    result.history.push_back(it);
    if (on_iteration) on_iteration(iter, it);
    if (result.history.size() > 1 && it.relative_change < options.em_tol) {
      result.converged = true;
      break;
    }
    if (iter + 1 == options.em_max_iter) break;

    Eigen::MatrixXd expected = Eigen::MatrixXd::Constant(Ki, Vi, options.smoothing);
    for (std::size_t d = 0; d < docs.size(); ++d) {
      const auto& entries = docs[d].entries();
      for (std::size_t n = 0; n < entries.size(); ++n) {
        const auto [word, count] = entries[n];
        expected.col(word) += static_cast<double>(count) * states[d].phi.row(static_cast<Eigen::Index>(n)).transpose();
      }
      gammas[d] = std::move(states[d].gamma);
    }
    result.model = LdaModel(std::vector<double>(K, alpha), normalized_log(std::move(expected)));
  }
  return result;
}

void save_model(const LdaModel& model, const std::filesystem::path& path) {
  const auto& lb = model.log_beta();
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(lb.size()));
  for (Eigen::Index i = 0; i < lb.rows(); ++i) {
    for (Eigen::Index w = 0; w < lb.cols(); ++w) flat.push_back(lb(i, w));
  }
  nlohmann::json j = {
      {"version", kModelVersion},
      {"K", model.num_topics()},
      {"V", model.vocab_size()},
      {"alpha", model.alpha()},
      {"log_beta", std::move(flat)},
  };
  std::ofstream out(path);
  if (!out) throw DataError("IoError", "cannot write " + path.string());
  out << j.dump() << '\n';
}

LdaModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("IoError", "cannot open " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("version").get<int>() != kModelVersion) {
      throw DataError("UnsupportedVersion", path.string() + " has model version " + j.at("version").dump());
    }
    const auto K = j.at("K").get<std::size_t>();
    const auto V = j.at("V").get<std::size_t>();
    auto alpha = j.at("alpha").get<std::vector<double>>();
    const auto flat = j.at("log_beta").get<std::vector<double>>();
    if (alpha.size() != K || flat.size() != K * V) {
      throw dimension_mismatch(path.string() + ": array sizes disagree with K and V");
    }
    Eigen::MatrixXd lb(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(V));
    for (std::size_t i = 0; i < K; ++i) {
      for (std::size_t w = 0; w < V; ++w) {
        lb(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(w)) = flat[i * V + w];
      }
    }
    return LdaModel(std::move(alpha), std::move(lb));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

}  // namespace topicdistill::lda
