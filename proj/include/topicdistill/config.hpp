// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration: one YAML file describing the corpus, thresholds,
// topic counts and the settings of every stage.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "topicdistill/corpus.hpp"
#include "topicdistill/evaluation.hpp"
#include "topicdistill/probe.hpp"

namespace topicdistill::cli {

struct ExperimentConfig {
  std::filesystem::path corpus;  // JSON Lines input, resolved against the config's directory
  std::filesystem::path output;  // run directory, resolved likewise
  std::uint64_t seed = 1;
  corpus::PrepareOptions thresholds;
  std::vector<std::size_t> topic_counts;
  eval::SweepConfig sweep;
  probe::ProbeOptions probe;
};

struct Diagnostic {
  std::string field;  // dotted path, e.g. "distill.3l.learning_rate"
  std::string message;
};

/// Every schema violation in the file. Throws ParseError for malformed YAML.
std::vector<Diagnostic> validate_config(const std::filesystem::path& path);

/// Parses and validates; throws DataError("InvalidConfig") listing the
/// diagnostics when the file is not valid.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Sets the base seed and every per-stage seed.
void override_seed(ExperimentConfig& config, std::uint64_t seed);

}  // namespace topicdistill::cli
