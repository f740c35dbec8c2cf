// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "support/test_support.hpp"
#include "topicdistill/error.hpp"
#include "topicdistill/mlp.hpp"

namespace td = topicdistill;
using td::TopicMixture;
using td::corpus::TfVector;
using td::distill::MlpModel;
using td::distill::Variant;

namespace {

double entropy(const TopicMixture& p) {
  double h = 0.0;
  for (double x : p.theta)
    if (x > 0) h -= x * std::log(x);
  return h;
}

MlpModel zero_model(Variant variant, std::size_t V, std::size_t K) {
  auto m = td::distill::init_mlp({variant, V, K}, 1);
  for (auto& l : m.layers) {
    l.weights.setZero();
    l.bias.setZero();
  }
  return m;
}

}  // namespace

TEST(MlpArchitecture, HiddenDimsFollowTopicCount) {
  td::distill::MlpArchitecture two{Variant::kTwoLayer, 2388, 10};
  EXPECT_EQ(two.hidden_dims(), (std::vector<std::size_t>{20}));
  td::distill::MlpArchitecture three{Variant::kThreeLayer, 2388, 10};
  EXPECT_EQ(three.hidden_dims(), (std::vector<std::size_t>{30, 20}));
}

TEST(MlpInit, ShapesAndGlorotBounds) {
  const auto m = td::distill::init_mlp({Variant::kTwoLayer, 2388, 10}, 7);
  ASSERT_EQ(m.layers.size(), 2u);
  EXPECT_EQ(m.layers[0].weights.rows(), 20);
  EXPECT_EQ(m.layers[0].weights.cols(), 2388);
  EXPECT_EQ(m.layers[1].weights.rows(), 10);
  EXPECT_EQ(m.layers[1].weights.cols(), 20);
  for (const auto& l : m.layers) {
    const double bound = std::sqrt(6.0 / static_cast<double>(l.weights.rows() + l.weights.cols()));
    EXPECT_LE(l.weights.cwiseAbs().maxCoeff(), bound);
    EXPECT_EQ(l.bias.cwiseAbs().maxCoeff(), 0.0);
  }
  const auto m3 = td::distill::init_mlp({Variant::kThreeLayer, 50, 10}, 7);
  EXPECT_EQ(m3.layers[0].weights.rows(), 30);
  EXPECT_EQ(m3.layers[1].weights.rows(), 20);
  EXPECT_EQ(m3.layers[1].weights.cols(), 30);
  EXPECT_EQ(m3.layers[2].weights.rows(), 10);
}

TEST(MlpInit, SameSeedIsBitIdentical) {
  const auto a = td::distill::init_mlp({Variant::kThreeLayer, 40, 5}, 99);
  const auto b = td::distill::init_mlp({Variant::kThreeLayer, 40, 5}, 99);
  const auto c = td::distill::init_mlp({Variant::kThreeLayer, 40, 5}, 100);
  for (std::size_t l = 0; l < a.layers.size(); ++l) EXPECT_EQ(a.layers[l].weights, b.layers[l].weights);
  EXPECT_NE(a.layers[0].weights, c.layers[0].weights);
}

TEST(MlpForward, ZeroWeightsGiveUniformOutput) {
  for (Variant v : {Variant::kTwoLayer, Variant::kThreeLayer}) {
    const auto m = zero_model(v, 8, 4);
    const auto out = td::distill::forward(m, TfVector({{1, 3}, {5, 2}}));
    for (double x : out.theta) EXPECT_DOUBLE_EQ(x, 0.25);
  }
}

TEST(MlpForward, OutputBiasShiftInvariance) {
  std::mt19937_64 rng(3);
  for (Variant v : {Variant::kTwoLayer, Variant::kThreeLayer}) {
    auto m = tdtest::random_mlp(v, 12, 5, 4);
    const auto doc = tdtest::random_doc(rng, 12, 30);
    const auto before = td::distill::forward(m, doc);
    m.layers.back().bias.array() += 17.25;
    const auto after = td::distill::forward(m, doc);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(before[i], after[i], 1e-12);
  }
}

// Reference values: tests/oracles/compute_oracles.py, mlp_hand_case().
TEST(MlpForward, HandWeightedNetwork) {
  auto m = zero_model(Variant::kTwoLayer, 2, 2);
  m.layers[0].weights << 0.5, -0.25, -1.0, 0.75, 0.2, 0.1, 0.0, -0.5;
  m.layers[0].bias << 0.1, 0.0, -0.3, 0.25;
  m.layers[1].weights << 1.0, -0.5, 0.3, 0.8, -0.7, 0.4, 0.9, -0.2;
  m.layers[1].bias << 0.05, -0.05;
  const auto out = td::distill::forward(m, TfVector({{0, 1}}));
  EXPECT_NEAR(out[0], 0.88112620289346732464, 1e-14);
  EXPECT_NEAR(out[1], 0.11887379710653267536, 1e-14);
}

TEST(MlpForward, OutputOnSimplexForLargeInputs) {
  std::mt19937_64 rng(8);
  auto m = tdtest::random_mlp(Variant::kThreeLayer, 10, 6, 2);
  for (auto& l : m.layers) l.weights *= 40.0;
  for (int i = 0; i < 20; ++i) {
    const auto out = td::distill::forward(m, tdtest::random_doc(rng, 10, 500));
    double s = 0.0;
    for (double x : out.theta) {
      EXPECT_GE(x, 0.0);
      EXPECT_TRUE(std::isfinite(x));
      s += x;
    }
    EXPECT_NEAR(s, 1.0, 1e-8);
  }
}

TEST(MlpForward, DimensionMismatch) {
  const auto m = zero_model(Variant::kTwoLayer, 4, 2);
  EXPECT_THROW((void)td::distill::forward(m, TfVector({{4, 1}})), td::DataError);
}

TEST(CrossEntropy, Examples) {
  const TopicMixture u{{0.25, 0.25, 0.25, 0.25}};
  EXPECT_NEAR(td::distill::cross_entropy(u, u), 1.3862944, 1e-7);
  const TopicMixture onehot{{0.0, 1.0, 0.0}};
  const TopicMixture q{{0.2, 0.5, 0.3}};
  EXPECT_DOUBLE_EQ(td::distill::cross_entropy(onehot, q), -std::log(0.5));
  EXPECT_THROW((void)td::distill::cross_entropy(onehot, TopicMixture{{0.5, 0.5, 0.0}}), td::NumericError);
}

TEST(CrossEntropy, GibbsInequalityAndKlGap) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 500; ++i) {
    const std::size_t K = 2 + rng() % 10;
    const TopicMixture p{tdtest::random_simplex(rng, K)};
    const TopicMixture q{tdtest::random_simplex(rng, K)};
    const double hpp = td::distill::cross_entropy(p, p);
    const double hpq = td::distill::cross_entropy(p, q);
    EXPECT_NEAR(hpp, entropy(p), 1e-12);
    double kl = 0.0;
    for (std::size_t j = 0; j < K; ++j) kl += p[j] * std::log(p[j] / q[j]);
    EXPECT_NEAR(hpq - hpp, kl, 1e-10);
    EXPECT_GE(hpq, hpp - 1e-12);
  }
}

TEST(MlpGradient, OutputDeltaVanishesWhenPredictionMatchesTarget) {
  std::mt19937_64 rng(19);
  const auto m = tdtest::random_mlp(Variant::kThreeLayer, 6, 3, 5);
  std::vector<td::distill::TrainingPair> batch;
  for (int i = 0; i < 3; ++i) {
    auto doc = tdtest::random_doc(rng, 6, 4);
    batch.push_back({doc, td::distill::forward(m, doc)});
  }
  const auto g = td::distill::gradient(m, batch);
  for (const auto& l : g.layers) {
    EXPECT_LT(l.weights.cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT(l.bias.cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(MlpGradient, MatchesCentralFiniteDifferences) {
  std::mt19937_64 rng(21);
  for (Variant v : {Variant::kTwoLayer, Variant::kThreeLayer}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto m = tdtest::random_mlp(v, 6, 3, seed);
      const auto batch = tdtest::random_pairs(rng, 6, 3, 1 + seed % 3, 4);
      const auto check = tdtest::check_gradient(m, batch);
      EXPECT_LT(check.max_rel_error, 1e-4) << td::distill::variant_name(v) << " seed " << seed;
    }
  }
}

TEST(MlpGradient, L1InputNormMatchesFiniteDifferences) {
  std::mt19937_64 rng(22);
  auto m = tdtest::random_mlp(Variant::kThreeLayer, 6, 3, 9);
  m.input_norm = td::distill::InputNorm::kL1;
  const auto batch = tdtest::random_pairs(rng, 6, 3, 2, 7);
  EXPECT_LT(tdtest::check_gradient(m, batch).max_rel_error, 1e-4);
}

TEST(MlpGradient, BatchMeanIsLinear) {
  std::mt19937_64 rng(27);
  const auto m = tdtest::random_mlp(Variant::kThreeLayer, 9, 4, 3);
  const auto pairs = tdtest::random_pairs(rng, 9, 4, 2, 6);
  const auto both = td::distill::gradient(m, pairs);
  const auto a = td::distill::gradient(m, std::span(pairs).subspan(0, 1));
  const auto b = td::distill::gradient(m, std::span(pairs).subspan(1, 1));
  for (std::size_t l = 0; l < both.layers.size(); ++l) {
    EXPECT_LT((both.layers[l].weights - 0.5 * (a.layers[l].weights + b.layers[l].weights)).cwiseAbs().maxCoeff(),
              1e-14);
    EXPECT_LT((both.layers[l].bias - 0.5 * (a.layers[l].bias + b.layers[l].bias)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(MlpGradient, EmptyBatchAndBadTargetsRejected) {
  const auto m = tdtest::random_mlp(Variant::kTwoLayer, 6, 3, 1);
  EXPECT_THROW((void)td::distill::gradient(m, {}), td::Error);
  std::vector<td::distill::TrainingPair> bad{{TfVector({{0, 1}}), TopicMixture{{0.5, 0.5}}}};
  EXPECT_THROW((void)td::distill::gradient(m, bad), td::DataError);
}

TEST(MlpTrain, SinglePairReachesTargetEntropy) {
  const TopicMixture target{{0.6, 0.3, 0.1}};
  std::vector<td::distill::TrainingPair> pairs{{TfVector({{0, 2}, {3, 1}}), target}};
  td::distill::TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.epochs = 200;
  cfg.batch_size = 1;
  for (Variant v : {Variant::kTwoLayer, Variant::kThreeLayer}) {
    const auto result = td::distill::train_sgd(td::distill::init_mlp({v, 5, 3}, 4), pairs, cfg);
    ASSERT_EQ(result.train_loss.size(), 200u);
    EXPECT_NEAR(result.train_loss.back(), entropy(target), 1e-3) << td::distill::variant_name(v);
  }
}

TEST(MlpTrain, DeterministicHistories) {
  std::mt19937_64 rng(31);
  const auto pairs = tdtest::random_pairs(rng, 20, 4, 30, 25);
  td::distill::TrainConfig cfg;
  cfg.epochs = 15;
  const auto init = td::distill::init_mlp({Variant::kThreeLayer, 20, 4}, 6);
  const auto a = td::distill::train_sgd(init, pairs, cfg, std::span(pairs).subspan(0, 5));
  const auto b = td::distill::train_sgd(init, pairs, cfg, std::span(pairs).subspan(0, 5));
  EXPECT_EQ(a.train_loss, b.train_loss);
  EXPECT_EQ(a.validation_loss, b.validation_loss);
  EXPECT_EQ(a.validation_loss.size(), 15u);
  for (std::size_t l = 0; l < a.model.layers.size(); ++l) EXPECT_EQ(a.model.layers[l].weights, b.model.layers[l].weights);
}

TEST(MlpTrain, LossDecreasesOnSyntheticDistillationSet) {
  // Teacher mixtures come from a random LDA model so that targets are a
  // learnable function of the input.
  std::mt19937_64 rng(37);
  const auto teacher = tdtest::random_lda(rng, 4, 30, 0.5, 0.3);
  std::vector<td::distill::TrainingPair> pairs;
  for (int d = 0; d < 50; ++d) {
    auto doc = tdtest::random_doc(rng, 30, 40);
    pairs.push_back({doc, td::lda::infer_theta(teacher, doc, {})});
  }
  td::distill::TrainConfig cfg;
  cfg.epochs = 60;
  cfg.learning_rate = 0.02;
  for (Variant v : {Variant::kTwoLayer, Variant::kThreeLayer}) {
    const auto r = td::distill::train_sgd(td::distill::init_mlp({v, 30, 4}, 2), pairs, cfg);
    EXPECT_LT(r.train_loss.back(), r.train_loss.front()) << td::distill::variant_name(v);
  }
}

TEST(MlpTrain, InvalidConfigAndDivergence) {
  std::vector<td::distill::TrainingPair> pairs{{TfVector({{0, 1}}), TopicMixture{{0.5, 0.5}}}};
  td::distill::TrainConfig cfg;
  cfg.learning_rate = 0.0;
  EXPECT_THROW((void)td::distill::train_sgd(td::distill::init_mlp({Variant::kTwoLayer, 2, 2}, 1), pairs, cfg),
               td::Error);
  // lr * weight_decay = 3 multiplies every weight by -2 per step.
  cfg = {};
  cfg.learning_rate = 1.0;
  cfg.weight_decay = 3.0;
  cfg.lr_decay = 1.0;
  cfg.epochs = 2000;
  try {
    (void)td::distill::train_sgd(td::distill::init_mlp({Variant::kTwoLayer, 2, 2}, 1), pairs, cfg);
    FAIL() << "expected DivergenceError";
  } catch (const td::NumericError& e) {
    EXPECT_EQ(e.kind(), "DivergenceError");
  }
}

TEST(MlpModelIo, RoundTripIsBitExact) {
  auto m = tdtest::random_mlp(Variant::kThreeLayer, 11, 3, 8);
  m.input_norm = td::distill::InputNorm::kL1;
  tdtest::TempDir tmp("mlp");
  td::distill::save_model(m, tmp.path() / "m.json");
  const auto back = td::distill::load_model(tmp.path() / "m.json");
  EXPECT_EQ(back.arch.variant, m.arch.variant);
  EXPECT_EQ(back.input_norm, m.input_norm);
  ASSERT_EQ(back.layers.size(), m.layers.size());
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    EXPECT_EQ(back.layers[l].weights, m.layers[l].weights);
    EXPECT_EQ(back.layers[l].bias, m.layers[l].bias);
  }
}
