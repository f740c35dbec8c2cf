// SPDX-License-Identifier: Apache-2.0
#include "topicdistill/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "topicdistill/error.hpp"
#include "topicdistill/rng.hpp"

namespace topicdistill::eval {

double kl_divergence(const TopicMixture& p, const TopicMixture& q) {
  if (p.size() != q.size()) throw dimension_mismatch("KL arguments differ in length");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (!(q[i] > 0.0)) throw domain_error("KL(p||q) undefined: q is zero where p is positive");
    kl += p[i] * std::log(p[i] / q[i]);
  }
  // Rounding can leave a tiny negative value for near-identical inputs.
  return std::max(kl, 0.0);
}

double mean_kl(std::span<const TopicMixture> teacher, std::span<const TopicMixture> student) {
  if (teacher.size() != student.size()) {
    throw DataError("LengthMismatch", std::to_string(teacher.size()) + " teacher vs " +
                                          std::to_string(student.size()) + " student mixtures");
  }
  if (teacher.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t d = 0; d < teacher.size(); ++d) total += kl_divergence(teacher[d], student[d]);
  return total / static_cast<double>(teacher.size());
}

// --- PCA --------------------------------------------------------------------

PcaModel pca_fit(const Eigen::MatrixXd& data, std::size_t k) {
  const Eigen::Index n = data.rows();
  const Eigen::Index dim = data.cols();
  if (n < 1 || dim < 1) throw DataError("EmptyDataset", "PCA needs a non-empty data matrix");
  if (k < 1) throw DataError("InvalidArgument", "PCA needs k >= 1");
  if (static_cast<Eigen::Index>(k) > n) {
    throw DataError("InvalidArgument", "PCA needs at least k = " + std::to_string(k) + " documents");
  }

  PcaModel model;
  model.mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd centered = data.rowwise() - model.mean.transpose();
  const double denom = static_cast<double>(std::max<Eigen::Index>(n - 1, 1));

  // Decompose whichever of the covariance (dim x dim) or the Gram matrix
  // (n x n) is smaller; both share their nonzero spectrum.
  Eigen::VectorXd values;
  Eigen::MatrixXd directions;  // columns are unit vectors in feature space
  if (dim <= n) {
    const Eigen::MatrixXd cov = centered.transpose() * centered / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    values = solver.eigenvalues().reverse();
    directions = solver.eigenvectors().rowwise().reverse();
  } else {
    const Eigen::MatrixXd gram = centered * centered.transpose() / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
    values = solver.eigenvalues().reverse();
    const Eigen::MatrixXd u = solver.eigenvectors().rowwise().reverse();
    directions = centered.transpose() * u;
    for (Eigen::Index j = 0; j < directions.cols(); ++j) {
      const double norm = directions.col(j).norm();
      if (norm > 0.0) directions.col(j) /= norm;
    }
  }

  const double top = std::max(values.size() > 0 ? values[0] : 0.0, 0.0);
  Eigen::Index available = 0;
  while (available < values.size() && values[available] > 1e-10 * top && values[available] > 0.0) ++available;
  const auto kept = std::min<Eigen::Index>(static_cast<Eigen::Index>(k), available);
  model.rank_deficient = kept < static_cast<Eigen::Index>(k);

  model.components.resize(kept, dim);
  model.explained.resize(kept);
  for (Eigen::Index j = 0; j < kept; ++j) {
    Eigen::VectorXd c = directions.col(j);
    Eigen::Index pivot = 0;
    c.cwiseAbs().maxCoeff(&pivot);
    if (c[pivot] < 0.0) c = -c;  // fix the sign so results are reproducible
    model.components.row(j) = c.transpose();
    model.explained[j] = values[j];
  }
  return model;
}

Eigen::VectorXd pca_transform(const PcaModel& model, const Eigen::VectorXd& v) {
  if (v.size() != model.mean.size()) throw dimension_mismatch("PCA input has the wrong dimension");
  return model.components * (v - model.mean);
}

Eigen::MatrixXd tf_matrix(std::span<const corpus::LabeledDoc> docs, std::size_t vocab_size) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(docs.size()),
                                            static_cast<Eigen::Index>(vocab_size));
  for (std::size_t d = 0; d < docs.size(); ++d) {
    if (docs[d].tf.dimension_bound() > vocab_size) throw dimension_mismatch("document indexes past V");
    for (const auto& [index, count] : docs[d].tf.entries()) {
      m(static_cast<Eigen::Index>(d), index) = static_cast<double>(count);
    }
  }
  return m;
}

// --- Linear classifier --------------------------------------------------------

Eigen::VectorXd LinearClassifier::margins(const Eigen::VectorXd& x) const {
  if (x.size() != feature_mean.size()) throw dimension_mismatch("classifier input has the wrong dimension");
  const Eigen::VectorXd z = (x - feature_mean).cwiseProduct(feature_scale);
  return weights * z + bias;
}

LinearClassifier train_classifier(std::span<const Eigen::VectorXd> vectors, std::span<const std::string> labels,
                                  const ClassifierConfig& config) {
  if (vectors.size() != labels.size()) throw DataError("LengthMismatch", "vectors and labels differ in length");
  if (!(config.lambda > 0.0) || config.epochs < 1) {
    throw DataError("InvalidArgument", "classifier needs lambda > 0 and epochs >= 1");
  }
  LinearClassifier clf;
  {
    std::vector<std::string> distinct(labels.begin(), labels.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2) throw DataError("SingleClass", "classifier needs at least two classes");
    clf.labels = std::move(distinct);
  }
  const std::size_t n = vectors.size();
  const Eigen::Index dim = vectors[0].size();
  for (const auto& v : vectors) {
    if (v.size() != dim) throw dimension_mismatch("classifier inputs differ in dimension");
  }

  clf.feature_mean = Eigen::VectorXd::Zero(dim);
  for (const auto& v : vectors) clf.feature_mean += v;
  clf.feature_mean /= static_cast<double>(n);
  Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
  for (const auto& v : vectors) var += (v - clf.feature_mean).array().square().matrix();
  var /= static_cast<double>(n);
  clf.feature_scale = Eigen::VectorXd::Ones(dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    if (var[j] > 1e-24) clf.feature_scale[j] = 1.0 / std::sqrt(var[j]);
  }

  std::vector<Eigen::VectorXd> z;
  z.reserve(n);
  for (const auto& v : vectors) z.push_back((v - clf.feature_mean).cwiseProduct(clf.feature_scale));
  std::vector<std::size_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<std::size_t>(std::lower_bound(clf.labels.begin(), clf.labels.end(), labels[i]) -
                                    clf.labels.begin());
  }

  const auto C = static_cast<Eigen::Index>(clf.labels.size());
  clf.weights = Eigen::MatrixXd::Zero(C, dim);
  clf.bias = Eigen::VectorXd::Zero(C);
  const double lambda = config.lambda;
  for (Eigen::Index c = 0; c < C; ++c) {
    // The bias is an extra constant-one feature, regularized like the rest.
    Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);
    double b = 0.0;
    // Same visiting order for every class, so a binary problem does not
    // depend on where its label sorts.
    Rng rng(config.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::uint64_t t = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      shuffle(std::span<std::size_t>(order), rng);
      for (std::size_t i : order) {
        ++t;
        const double eta = 1.0 / (lambda * static_cast<double>(t));
        const double target = y[i] == static_cast<std::size_t>(c) ? 1.0 : -1.0;
        const double margin = target * (w.dot(z[i]) + b);
        const double shrink = 1.0 - eta * lambda;
        w *= shrink;
        b *= shrink;
        if (margin < 1.0) {
          w.noalias() += eta * target * z[i];
          b += eta * target;
        }
        // Projection onto the ball of radius 1/sqrt(lambda).
        const double norm2 = w.squaredNorm() + b * b;
        const double radius2 = 1.0 / lambda;
        if (norm2 > radius2) {
          const double s = std::sqrt(radius2 / norm2);
          w *= s;
          b *= s;
        }
      }
    }
    clf.weights.row(c) = w.transpose();
    clf.bias[c] = b;
  }
  return clf;
}

const std::string& classify(const LinearClassifier& clf, const Eigen::VectorXd& x) {
  const Eigen::VectorXd m = clf.margins(x);
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < m.size(); ++c) {
    if (m[c] > m[best]) best = c;
  }
  return clf.labels[static_cast<std::size_t>(best)];
}

double accuracy(const LinearClassifier& clf, std::span<const Eigen::VectorXd> vectors,
                std::span<const std::string> labels) {
  if (vectors.size() != labels.size()) throw DataError("LengthMismatch", "vectors and labels differ in length");
  if (vectors.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < vectors.size(); ++i) correct += classify(clf, vectors[i]) == labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(vectors.size());
}

double majority_baseline(std::span<const std::string> train_labels, std::span<const std::string> test_labels) {
  if (test_labels.empty() || train_labels.empty()) return 0.0;
  std::map<std::string, std::size_t> counts;
  for (const auto& l : train_labels) ++counts[l];
  const auto majority = std::max_element(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
                          return a.second < b.second;
                        })->first;
  const auto hits = std::count(test_labels.begin(), test_labels.end(), majority);
  return static_cast<double>(hits) / static_cast<double>(test_labels.size());
}

// --- Inference speed ----------------------------------------------------------

SpeedResult benchmark_speed(const lda::LdaModel& lda_model, const distill::MlpModel& mlp,
                            std::span<const corpus::TfVector> docs, int repetitions,
                            const lda::InferOptions& infer_options) {
  if (repetitions < 1) throw DataError("InvalidArgument", "repetitions must be >= 1");
  if (lda_model.vocab_size() != mlp.arch.input_dim || lda_model.num_topics() != mlp.arch.output_dim) {
    throw dimension_mismatch("LDA and DNN models disagree on V or K");
  }
  using Clock = std::chrono::steady_clock;
  volatile double sink = 0.0;

  auto time_lda = [&] {
    double acc = 0.0;
    const auto start = Clock::now();
    for (const auto& d : docs) acc += lda::infer_theta(lda_model, d, infer_options)[0];
    const std::chrono::duration<double> elapsed = Clock::now() - start;
    sink = sink + acc;
    return elapsed.count();
  };
  auto time_dnn = [&] {
    double acc = 0.0;
    const auto start = Clock::now();
    for (const auto& d : docs) acc += distill::forward(mlp, d)[0];
    const std::chrono::duration<double> elapsed = Clock::now() - start;
    sink = sink + acc;
    return elapsed.count();
  };

  time_lda();
  time_dnn();

  SpeedResult result;
  result.repetitions = repetitions;
  result.threads = 1;
  for (int r = 0; r < repetitions; ++r) {
    const double lda_s = time_lda();
    const double dnn_s = std::max(time_dnn(), 1e-9);
    result.mean_lda_seconds += lda_s;
    result.mean_dnn_seconds += dnn_s;
    result.ratios.push_back(lda_s / dnn_s);
  }
  result.mean_lda_seconds /= repetitions;
  result.mean_dnn_seconds /= repetitions;
  result.mean_ratio = std::accumulate(result.ratios.begin(), result.ratios.end(), 0.0) / repetitions;
  double var = 0.0;
  for (double r : result.ratios) var += (r - result.mean_ratio) * (r - result.mean_ratio);
  result.sd_ratio = repetitions > 1 ? std::sqrt(var / (repetitions - 1)) : 0.0;
  return result;
}

// --- Sweep ----------------------------------------------------------------------

std::vector<distill::TrainingPair> make_pairs(std::span<const corpus::LabeledDoc> docs,
                                              std::span<const TopicMixture> thetas) {
  if (docs.size() != thetas.size()) throw DataError("LengthMismatch", "documents and mixtures differ in length");
  std::vector<distill::TrainingPair> pairs;
  pairs.reserve(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) pairs.push_back({docs[d].tf, thetas[d]});
  return pairs;
}

TopicArtifacts train_topic_artifacts(const corpus::Dataset& dataset, std::size_t K, const SweepConfig& config) {
  std::vector<corpus::TfVector> train_tf;
  train_tf.reserve(dataset.train.size());
  for (const auto& d : dataset.train) train_tf.push_back(d.tf);

  lda::EmOptions em = config.lda;
  em.num_topics = K;
  em.threads = config.threads;
  TopicArtifacts out;
  out.lda = lda::train_em(train_tf, dataset.vocabulary.size(), em).model;
  for (const auto& d : dataset.train) out.theta_train.push_back(lda::infer_theta(out.lda, d.tf, em.e_step));
  for (const auto& d : dataset.test) out.theta_test.push_back(lda::infer_theta(out.lda, d.tf, em.e_step));

  const auto train_pairs = make_pairs(dataset.train, out.theta_train);
  const auto test_pairs = make_pairs(dataset.test, out.theta_test);
  for (auto variant : {distill::Variant::kTwoLayer, distill::Variant::kThreeLayer}) {
    const distill::MlpArchitecture arch{variant, dataset.vocabulary.size(), K};
    auto init = distill::init_mlp(arch, (variant == distill::Variant::kTwoLayer ? config.distill_2l : config.distill_3l).seed,
                                  config.input_norm);
    const auto& train_config = variant == distill::Variant::kTwoLayer ? config.distill_2l : config.distill_3l;
    auto trained = distill::train_sgd(std::move(init), train_pairs, train_config, test_pairs).model;
    (variant == distill::Variant::kTwoLayer ? out.dnn2l : out.dnn3l) = std::move(trained);
  }
  return out;
}

EvalRow evaluate_topic_count(const corpus::Dataset& dataset, const TopicArtifacts& a, const SweepConfig& config) {
  const std::size_t K = a.lda.num_topics();
  EvalRow row;
  row.K = K;

  std::vector<std::string> train_labels, test_labels;
  for (const auto& d : dataset.train) train_labels.push_back(d.label);
  for (const auto& d : dataset.test) test_labels.push_back(d.label);

  auto to_vectors = [](std::span<const TopicMixture> ms) {
    std::vector<Eigen::VectorXd> out;
    for (const auto& m : ms) out.push_back(Eigen::Map<const Eigen::VectorXd>(m.theta.data(), static_cast<Eigen::Index>(m.size())));
    return out;
  };
  auto score = [&](std::span<const Eigen::VectorXd> train_v, std::span<const Eigen::VectorXd> test_v) {
    const auto clf = train_classifier(train_v, train_labels, config.classifier);
    return accuracy(clf, test_v, test_labels);
  };

  row.acc_lda = score(to_vectors(a.theta_train), to_vectors(a.theta_test));

  for (const auto* model : {&a.dnn2l, &a.dnn3l}) {
    std::vector<TopicMixture> train_out, test_out;
    for (const auto& d : dataset.train) train_out.push_back(distill::forward(*model, d.tf));
    for (const auto& d : dataset.test) test_out.push_back(distill::forward(*model, d.tf));
    const double acc = score(to_vectors(train_out), to_vectors(test_out));
    const double kl = mean_kl(a.theta_test, test_out);
    if (model == &a.dnn2l) {
      row.acc_dnn2l = acc;
      row.kl_2l = kl;
    } else {
      row.acc_dnn3l = acc;
      row.kl_3l = kl;
    }
  }

  const std::size_t V = dataset.vocabulary.size();
  const auto pca = pca_fit(tf_matrix(dataset.train, V), K);
  if (pca.rank_deficient) {
    fmt::print(stderr, "warning: RankDeficient: PCA found only {} of {} components\n", pca.components.rows(), K);
  }
  std::vector<Eigen::VectorXd> pca_train, pca_test;
  const Eigen::MatrixXd train_m = tf_matrix(dataset.train, V);
  const Eigen::MatrixXd test_m = tf_matrix(dataset.test, V);
  for (Eigen::Index i = 0; i < train_m.rows(); ++i) pca_train.push_back(pca_transform(pca, train_m.row(i).transpose()));
  for (Eigen::Index i = 0; i < test_m.rows(); ++i) pca_test.push_back(pca_transform(pca, test_m.row(i).transpose()));
  row.acc_pca = score(pca_train, pca_test);

  return row;
}

void benchmark_topic_count(const corpus::Dataset& dataset, const TopicArtifacts& a, const SweepConfig& config,
                           EvalRow& row) {
  std::vector<corpus::TfVector> test_tf;
  for (const auto& d : dataset.test) test_tf.push_back(d.tf);
  row.speed_2l = benchmark_speed(a.lda, a.dnn2l, test_tf, config.repetitions, config.lda.e_step);
  row.speed_3l = benchmark_speed(a.lda, a.dnn3l, test_tf, config.repetitions, config.lda.e_step);
}

EvalReport run_sweep(const corpus::Dataset& dataset, std::span<const std::size_t> topic_counts,
                     const SweepConfig& config, const std::function<void(const std::string&)>& log) {
  if (topic_counts.empty()) throw DataError("InvalidArgument", "no topic counts requested");
  EvalReport report;
  for (std::size_t K : topic_counts) {
    if (log) log(fmt::format("K={}: training LDA and students", K));
    const auto artifacts = train_topic_artifacts(dataset, K, config);
    if (log) log(fmt::format("K={}: evaluating", K));
    auto row = evaluate_topic_count(dataset, artifacts, config);
    if (log) log(fmt::format("K={}: timing inference", K));
    benchmark_topic_count(dataset, artifacts, config, row);
    report.rows.push_back(row);
  }
  return report;
}

std::string deterministic_columns(const EvalReport& report) {
  std::string out = "K,acc_pca,acc_lda,acc_dnn2l,acc_dnn3l,kl_2l,kl_3l\n";
  for (const auto& r : report.rows) {
    out += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.K, r.acc_pca, r.acc_lda, r.acc_dnn2l,
                       r.acc_dnn3l, r.kl_2l, r.kl_3l);
  }
  return out;
}

void write_report(const EvalReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / "report.csv");
  csv << "K,acc_pca,acc_lda,acc_dnn2l,acc_dnn3l,kl_2l,kl_3l,ratio_2l,ratio_3l,ratio_sd_2l,ratio_sd_3l\n";
  std::ofstream acc_tsv(dir / "accuracy.tsv"), kl_tsv(dir / "kl.tsv"), speed_tsv(dir / "speed.tsv");
  acc_tsv << "K\tPCA\tLDA\tDNN-2L\tDNN-3L\n";
  kl_tsv << "K\tDNN-2L\tDNN-3L\n";
  speed_tsv << "# LDA/DNN inference-time ratio, single thread; reference band 10-200x (context only)\n";
  speed_tsv << "K\tDNN-2L\tDNN-3L\tsd_2L\tsd_3L\trepetitions\n";
  for (const auto& r : report.rows) {
    csv << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.6g},{:.6g},{:.6g},{:.6g}\n", r.K,
                       r.acc_pca, r.acc_lda, r.acc_dnn2l, r.acc_dnn3l, r.kl_2l, r.kl_3l, r.speed_2l.mean_ratio,
                       r.speed_3l.mean_ratio, r.speed_2l.sd_ratio, r.speed_3l.sd_ratio);
    acc_tsv << fmt::format("{}\t{:.6f}\t{:.6f}\t{:.6f}\t{:.6f}\n", r.K, r.acc_pca, r.acc_lda, r.acc_dnn2l, r.acc_dnn3l);
    kl_tsv << fmt::format("{}\t{:.8g}\t{:.8g}\n", r.K, r.kl_2l, r.kl_3l);
    speed_tsv << fmt::format("{}\t{:.6g}\t{:.6g}\t{:.6g}\t{:.6g}\t{}\n", r.K, r.speed_2l.mean_ratio, r.speed_3l.mean_ratio,
                        r.speed_2l.sd_ratio, r.speed_3l.sd_ratio, r.speed_2l.repetitions);
  }
}

}  // namespace topicdistill::eval
