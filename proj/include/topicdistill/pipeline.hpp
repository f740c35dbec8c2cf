// SPDX-License-Identifier: Apache-2.0
//
// Pipeline stages shared by the individual CLI subcommands and `run`.
#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "topicdistill/config.hpp"
#include "topicdistill/corpus.hpp"
#include "topicdistill/error.hpp"
#include "topicdistill/evaluation.hpp"
#include "topicdistill/lda.hpp"
#include "topicdistill/mlp.hpp"
#include "topicdistill/probe.hpp"

namespace topicdistill::cli {

namespace fs = std::filesystem;

using Logger = std::function<void(const std::string&)>;

// --- Individual stages ------------------------------------------------------

/// JSONL corpus -> dataset bundle directory.
corpus::Dataset stage_prepare(const fs::path& corpus_path, const corpus::PrepareOptions& options, const fs::path& out);

lda::LdaModel stage_train_lda(const fs::path& data_dir, const lda::EmOptions& options, const fs::path& out,
                              const Logger& log = {});

/// Teacher mixtures for one split of the bundle, written as theta.tsv.
void stage_infer_lda(const fs::path& model_path, const fs::path& data_dir, const std::string& split,
                     const lda::InferOptions& options, const fs::path& out);

/// Trains a student on the bundle's training split against `theta_path`
/// (joined by document id). When given, validation mixtures are joined
/// against the test split. Writes the model and, if `history_out` is set, a
/// per-epoch loss table.
distill::MlpModel stage_distill(const fs::path& data_dir, const fs::path& theta_path, distill::Variant variant,
                                const distill::TrainConfig& config, distill::InputNorm input_norm,
                                const fs::path& out, const std::optional<fs::path>& validation_theta = {},
                                const std::optional<fs::path>& history_out = {});

void stage_infer_dnn(const fs::path& model_path, const fs::path& data_dir, const std::string& split,
                     const fs::path& out);

eval::SpeedResult stage_benchmark(const fs::path& lda_path, const fs::path& dnn_path, const fs::path& data_dir,
                                  const std::string& split, int repetitions, const lda::InferOptions& options);

probe::ProbeReport stage_probe(const fs::path& model_path, const fs::path& vocab_path,
                               const probe::ProbeOptions& options, const fs::path& out,
                               const std::optional<fs::path>& edges_out = {});

// --- Full pipeline ----------------------------------------------------------

struct RunOptions {
  bool force = false;
  unsigned threads = 1;
  Logger log;
};

struct RunSummary {
  std::vector<std::string> executed;  // "prepare", "train-lda[K=10]", ...
  std::vector<std::string> skipped;
  fs::path manifest;
};

/// Runs every stage in dependency order under config.output. A stage is
/// skipped when all of its outputs exist, unless `force` is set or an
/// upstream stage ran in this invocation. Writes manifest.json with seeds,
/// thresholds and SHA-256 hashes of every deterministic artifact; timing
/// results are kept under its "timing" key. Errors propagate with the stage
/// name prefixed and leave finished outputs in place.
RunSummary run_pipeline(const ExperimentConfig& config, const RunOptions& options);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const fs::path& path);

/// Thrown by run_pipeline; wraps the failing stage's error.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const Error& cause)
      : std::runtime_error(stage + ": " + cause.what()), stage_(std::move(stage)), category_(cause.category()) {}
  const std::string& stage() const noexcept { return stage_; }
  Error::Category category() const noexcept { return category_; }

 private:
  std::string stage_;
  Error::Category category_;
};

}  // namespace topicdistill::cli
