// SPDX-License-Identifier: Apache-2.0
//
// Neuron probing: push one-hot word vectors through a trained student and
// rank words by the activation they cause on each hidden neuron.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "topicdistill/corpus.hpp"
#include "topicdistill/mlp.hpp"

namespace topicdistill::probe {

enum class Ranking { kSigned, kAbsolute };

struct ProbeOptions {
  std::size_t top = 10;
  double scale = 1.0;  // magnitude of the one-hot entry
  Ranking ranking = Ranking::kSigned;
  std::size_t edges_per_neuron = 5;
};

struct WordActivation {
  std::uint32_t word_index = 0;
  std::string word;
  double activation = 0.0;
};

struct NeuronProfile {
  std::size_t layer = 1;  // 1-based hidden layer
  std::size_t neuron = 0;
  std::vector<WordActivation> top_words;  // best first, ties by ascending word index
};

/// Strongest incoming weight from a first-layer neuron into a second-layer one.
struct LayerEdge {
  std::size_t to_neuron = 0;    // second hidden layer
  std::size_t from_neuron = 0;  // first hidden layer
  double weight = 0.0;
};

struct ProbeReport {
  std::vector<NeuronProfile> profiles;  // layer-major, one per hidden neuron
  std::vector<LayerEdge> edges;         // empty for two-layer models
};

/// Post-tanh activations of every hidden layer for the one-hot input of
/// `word_index`. IndexOutOfRange when word_index >= V.
std::vector<Eigen::VectorXd> probe_activations(const distill::MlpModel& model, std::uint32_t word_index,
                                               double scale = 1.0);

/// Hidden-layer activations for every word: result[l] is (neurons x V).
std::vector<Eigen::MatrixXd> activation_table(const distill::MlpModel& model, double scale = 1.0);

NeuronProfile top_words(const distill::MlpModel& model, const corpus::Vocabulary& vocab, std::size_t layer,
                        std::size_t neuron, const ProbeOptions& options = {});

ProbeReport probe_report(const distill::MlpModel& model, const corpus::Vocabulary& vocab,
                         const ProbeOptions& options = {});

/// probe.tsv: layer, neuron, then word:activation pairs. edges.tsv is written
/// only when the report has inter-layer edges.
void write_probe_report(const ProbeReport& report, const std::filesystem::path& probe_tsv,
                        const std::filesystem::path& edges_tsv);

}  // namespace topicdistill::probe
