// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "support/test_support.hpp"
#include "topicdistill/config.hpp"
#include "topicdistill/error.hpp"
#include "topicdistill/mixture_io.hpp"
#include "topicdistill/pipeline.hpp"

namespace td = topicdistill;
namespace fs = std::filesystem;

namespace {

fs::path write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Matches the field itself or an element path below it ("topic_counts[1]").
bool has_field(const std::vector<td::cli::Diagnostic>& diags, const std::string& field) {
  for (const auto& d : diags)
    if (d.field == field || d.field.rfind(field + "[", 0) == 0) return true;
  return false;
}

std::string small_config(const fs::path& out) {
  return "corpus: " + std::string(TOPICDISTILL_SAMPLE_CORPUS) + "\noutput: " + out.string() +
         "\nseed: 3\nthresholds: {min_doc_len: 50, min_word_freq: 5}\ntopic_counts: [4]\n"
         "lda: {em_max_iter: 8}\n"
         "distill:\n  2l: {epochs: 8}\n  3l: {epochs: 8}\n"
         "eval: {repetitions: 1}\n";
}

}  // namespace

TEST(Config, SampleConfigIsValid) {
  const fs::path sample = fs::path(TOPICDISTILL_SOURCE_DIR) / "configs" / "sample.yaml";
  EXPECT_TRUE(td::cli::validate_config(sample).empty());
  const auto cfg = td::cli::load_config(sample);
  EXPECT_EQ(cfg.topic_counts, (std::vector<std::size_t>{10}));
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_TRUE(fs::exists(cfg.corpus));
  EXPECT_EQ(cfg.thresholds.min_doc_len, 50u);
  EXPECT_EQ(cfg.sweep.repetitions, 10);
}

TEST(Config, EveryViolationIsListedWithItsPath) {
  tdtest::TempDir tmp("cfg");
  const auto path = write(tmp.path() / "bad.yaml",
                          "corpus: /nonexistent/corpus.jsonl\n"
                          "output: out\n"
                          "topic_counts: [10, 5, 1]\n"
                          "bogus: 1\n"
                          "distill:\n  3l: {learning_rate: -1, epochs: 0}\n"
                          "probe: {ranking: sideways}\n");
  const auto diags = td::cli::validate_config(path);
  EXPECT_TRUE(has_field(diags, "corpus"));
  EXPECT_TRUE(has_field(diags, "topic_counts"));
  EXPECT_TRUE(has_field(diags, "bogus"));
  EXPECT_TRUE(has_field(diags, "distill.3l.learning_rate"));
  EXPECT_TRUE(has_field(diags, "distill.3l.epochs"));
  EXPECT_TRUE(has_field(diags, "probe.ranking"));
  EXPECT_THROW((void)td::cli::load_config(path), td::DataError);
}

TEST(Config, SyntaxErrorCarriesLocation) {
  tdtest::TempDir tmp("cfg");
  const auto path = write(tmp.path() / "broken.yaml", "corpus: a\nlda: {alpha: [1,\n");
  try {
    (void)td::cli::validate_config(path);
    FAIL();
  } catch (const td::ParseError& e) {
    EXPECT_GE(e.line(), 2u);
  }
}

TEST(Config, SeedOverrideReachesEverySubSeed) {
  tdtest::TempDir tmp("cfg");
  auto cfg = td::cli::load_config(write(tmp.path() / "c.yaml", small_config(tmp.path() / "run")));
  td::cli::override_seed(cfg, 99);
  EXPECT_EQ(cfg.seed, 99u);
  EXPECT_EQ(cfg.sweep.lda.seed, 99u);
  EXPECT_EQ(cfg.sweep.distill_2l.seed, 99u);
  EXPECT_EQ(cfg.sweep.distill_3l.seed, 99u);
  EXPECT_EQ(cfg.sweep.classifier.seed, 99u);
}

TEST(MixtureIo, RoundTripAndJoin) {
  tdtest::TempDir tmp("mix");
  std::vector<td::MixtureRow> rows{{"b", td::TopicMixture{{0.1, 0.9}}},
                                   {"a", td::TopicMixture{{1.0 / 3.0, 2.0 / 3.0}}}};
  td::write_theta_tsv(tmp.path() / "t.tsv", rows);
  const auto back = td::read_theta_tsv(tmp.path() / "t.tsv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].mixture, rows[1].mixture);
  std::vector<td::corpus::LabeledDoc> docs{{"a", "x", {}}, {"b", "y", {}}};
  const auto joined = td::join_by_id(docs, back);
  EXPECT_EQ(joined[0], rows[1].mixture);
  EXPECT_EQ(joined[1], rows[0].mixture);
  docs.push_back({"c", "x", {}});
  EXPECT_THROW((void)td::join_by_id(docs, back), td::DataError);
}

TEST(Pipeline, RerunIsNoOpAndForceRebuilds) {
  tdtest::TempDir tmp("pipe");
  const auto cfg = td::cli::load_config(write(tmp.path() / "c.yaml", small_config(tmp.path() / "run")));
  const auto first = td::cli::run_pipeline(cfg, {});
  EXPECT_FALSE(first.executed.empty());
  const auto manifest = slurp(first.manifest);
  for (const char* f : {"data/vocab.txt", "k4/lda.json", "k4/theta_test.tsv", "k4/dnn_2l.json", "k4/dnn_3l.json",
                        "k4/probe_3l.tsv", "k4/edges_3l.tsv", "report/report.csv"}) {
    EXPECT_TRUE(fs::exists(tmp.path() / "run" / f)) << f;
  }

  const auto second = td::cli::run_pipeline(cfg, {});
  EXPECT_TRUE(second.executed.empty());
  EXPECT_FALSE(second.skipped.empty());
  EXPECT_EQ(slurp(second.manifest), manifest);

  td::cli::RunOptions force;
  force.force = true;
  const auto third = td::cli::run_pipeline(cfg, force);
  EXPECT_EQ(third.executed.size(), first.executed.size());
  auto strip = [](std::string text) {
    auto j = nlohmann::json::parse(text);
    j.erase("timing");
    return j.dump();
  };
  EXPECT_EQ(strip(slurp(third.manifest)), strip(manifest));
}

TEST(Pipeline, UpstreamChangeReRunsDownstream) {
  tdtest::TempDir tmp("pipe");
  const auto cfg = td::cli::load_config(write(tmp.path() / "c.yaml", small_config(tmp.path() / "run")));
  (void)td::cli::run_pipeline(cfg, {});
  fs::remove(tmp.path() / "run" / "k4" / "lda.json");
  const auto again = td::cli::run_pipeline(cfg, {});
  bool distill_ran = false;
  for (const auto& s : again.executed) distill_ran |= s.rfind("distill", 0) == 0;
  EXPECT_TRUE(distill_ran);
}

TEST(Pipeline, StageErrorNamesTheStage) {
  tdtest::TempDir tmp("pipe");
  const auto corpus = write(tmp.path() / "tiny.jsonl",
                            "{\"id\":\"a\",\"label\":\"x\",\"text\":\"gold mine\",\"split\":\"train\"}\n");
  auto cfg = td::cli::load_config(write(tmp.path() / "c.yaml", small_config(tmp.path() / "run")));
  cfg.corpus = corpus;
  try {
    (void)td::cli::run_pipeline(cfg, {});
    FAIL();
  } catch (const td::cli::StageError& e) {
    EXPECT_EQ(e.stage(), "prepare");
    EXPECT_EQ(e.category(), td::Error::Category::kData);
  }
}

TEST(Pipeline, Sha256KnownAnswer) {
  EXPECT_EQ(td::cli::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
