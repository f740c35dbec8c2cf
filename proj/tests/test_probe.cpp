// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <fstream>
#include <numeric>

#include <gtest/gtest.h>

#include "support/test_support.hpp"
#include "topicdistill/error.hpp"
#include "topicdistill/probe.hpp"

namespace td = topicdistill;
using td::distill::Variant;

namespace {

td::corpus::Vocabulary vocab_of(std::size_t V) {
  std::vector<std::string> words;
  for (std::size_t i = 0; i < V; ++i) words.push_back("w" + std::to_string(i));
  return td::corpus::Vocabulary::from_words(words, 1);
}

}  // namespace

TEST(ProbeActivations, ZeroWeightsGiveZero) {
  auto m = td::distill::init_mlp({Variant::kThreeLayer, 5, 2}, 1);
  for (auto& l : m.layers) l.weights.setZero();
  for (const auto& layer : td::probe::probe_activations(m, 3)) EXPECT_EQ(layer.cwiseAbs().maxCoeff(), 0.0);
}

TEST(ProbeActivations, FirstLayerSelectsWeightColumn) {
  const auto m = tdtest::random_mlp(Variant::kThreeLayer, 7, 3, 4);
  for (std::uint32_t w = 0; w < 7; ++w) {
    const auto acts = td::probe::probe_activations(m, w);
    ASSERT_EQ(acts.size(), 2u);
    for (Eigen::Index j = 0; j < acts[0].size(); ++j) {
      EXPECT_DOUBLE_EQ(acts[0][j], std::tanh(m.layers[0].weights(j, w) + m.layers[0].bias[j]));
    }
  }
}

// Reference values: tests/oracles/compute_oracles.py, probe_hand_case().
TEST(ProbeActivations, HandWeightedModel) {
  auto m = td::distill::init_mlp({Variant::kTwoLayer, 2, 1}, 1);
  m.layers[0].weights << 0.8, -0.4, 0.3, 1.2;
  m.layers[0].bias << -0.1, 0.2;
  const auto a0 = td::probe::probe_activations(m, 0)[0];
  const auto a1 = td::probe::probe_activations(m, 1)[0];
  EXPECT_NEAR(a0[0], 0.60436777711716352097, 1e-15);
  EXPECT_NEAR(a0[1], 0.4621171572600097585, 1e-15);
  EXPECT_NEAR(a1[0], -0.46211715726000978033, 1e-15);
  EXPECT_NEAR(a1[1], 0.88535164820226250038, 1e-15);
}

TEST(ProbeActivations, IndexOutOfRange) {
  const auto m = td::distill::init_mlp({Variant::kTwoLayer, 4, 2}, 1);
  try {
    (void)td::probe::probe_activations(m, 4);
    FAIL();
  } catch (const td::DataError& e) {
    EXPECT_EQ(e.kind(), "IndexOutOfRange");
  }
  EXPECT_THROW((void)td::probe::top_words(m, vocab_of(4), 2, 0), td::DataError);
  EXPECT_THROW((void)td::probe::top_words(m, vocab_of(4), 1, 4), td::DataError);
}

TEST(TopWords, DominantWordRanksFirst) {
  auto m = tdtest::random_mlp(Variant::kTwoLayer, 6, 2, 3);
  const auto vocab = td::corpus::Vocabulary::from_words({"oil", "wheat", "gold", "bank", "corn", "ship"}, 1);
  m.layers[0].weights(1, 2) = 10.0;
  const auto p = td::probe::top_words(m, vocab, 1, 1);
  EXPECT_EQ(p.top_words.front().word, "gold");
}

TEST(TopWords, ClampsToVocabularySizeAndBreaksTiesByIndex) {
  auto m = td::distill::init_mlp({Variant::kTwoLayer, 4, 2}, 1);
  m.layers[0].weights.setZero();
  td::probe::ProbeOptions opts;
  opts.top = 10;
  const auto p = td::probe::top_words(m, vocab_of(4), 1, 0, opts);
  ASSERT_EQ(p.top_words.size(), 4u);
  for (std::uint32_t i = 0; i < 4; ++i) EXPECT_EQ(p.top_words[i].word_index, i);
}

TEST(TopWords, FirstLayerRankingFollowsWeightsPlusBias) {
  const std::size_t V = 40;
  const auto m = tdtest::random_mlp(Variant::kThreeLayer, V, 4, 11);
  td::probe::ProbeOptions opts;
  opts.top = V;
  for (Eigen::Index j = 0; j < m.layers[0].weights.rows(); ++j) {
    std::vector<std::uint32_t> order(V);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      return m.layers[0].weights(j, a) > m.layers[0].weights(j, b);
    });
    const auto p = td::probe::top_words(m, vocab_of(V), 1, static_cast<std::size_t>(j), opts);
    for (std::size_t r = 0; r < V; ++r) EXPECT_EQ(p.top_words[r].word_index, order[r]);
  }
}

TEST(TopWords, AbsoluteRanking) {
  auto m = td::distill::init_mlp({Variant::kTwoLayer, 3, 1}, 1);
  m.layers[0].weights.row(0) << 0.5, -2.0, 1.0;
  m.layers[0].bias.setZero();
  td::probe::ProbeOptions opts;
  opts.ranking = td::probe::Ranking::kAbsolute;
  const auto p = td::probe::top_words(m, vocab_of(3), 1, 0, opts);
  EXPECT_EQ(p.top_words[0].word_index, 1u);
  EXPECT_EQ(p.top_words[1].word_index, 2u);
}

TEST(ProbeReport, OneProfilePerHiddenNeuronAndDeterministic) {
  const auto m = tdtest::random_mlp(Variant::kThreeLayer, 25, 3, 2);
  const auto vocab = vocab_of(25);
  const auto a = td::probe::probe_report(m, vocab);
  const auto b = td::probe::probe_report(m, vocab);
  EXPECT_EQ(a.profiles.size(), 9u + 6u);
  EXPECT_FALSE(a.edges.empty());
  ASSERT_EQ(a.profiles.size(), b.profiles.size());
  for (std::size_t i = 0; i < a.profiles.size(); ++i) {
    const auto& pa = a.profiles[i].top_words;
    ASSERT_EQ(pa.size(), 10u);
    for (std::size_t r = 0; r < pa.size(); ++r) {
      EXPECT_EQ(pa[r].word_index, b.profiles[i].top_words[r].word_index);
      if (r > 0) EXPECT_GE(pa[r - 1].activation, pa[r].activation);
    }
  }
  const auto two = td::probe::probe_report(tdtest::random_mlp(Variant::kTwoLayer, 25, 3, 2), vocab);
  EXPECT_EQ(two.profiles.size(), 6u);
  EXPECT_TRUE(two.edges.empty());

  tdtest::TempDir tmp("probe");
  td::probe::write_probe_report(a, tmp.path() / "probe.tsv", tmp.path() / "edges.tsv");
  std::ifstream in(tmp.path() / "probe.tsv");
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) lines += !line.empty() && line[0] != '#';
  EXPECT_GE(lines, a.profiles.size());
}
