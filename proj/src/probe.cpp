// SPDX-License-Identifier: Apache-2.0
#include "topicdistill/probe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "topicdistill/error.hpp"

namespace topicdistill::probe {

namespace {

void check_vocab(const distill::MlpModel& model, const corpus::Vocabulary& vocab) {
  if (vocab.size() != model.arch.input_dim) {
    throw dimension_mismatch("vocabulary has " + std::to_string(vocab.size()) + " words, model input has " +
                             std::to_string(model.arch.input_dim));
  }
}

NeuronProfile rank_row(const Eigen::Ref<const Eigen::RowVectorXd>& row, const corpus::Vocabulary& vocab,
                       std::size_t layer, std::size_t neuron, const ProbeOptions& options) {
  auto key = [&](Eigen::Index w) { return options.ranking == Ranking::kSigned ? row[w] : std::abs(row[w]); };
  std::vector<std::uint32_t> order(static_cast<std::size_t>(row.size()));
  std::iota(order.begin(), order.end(), 0u);
  const std::size_t n = std::min(options.top, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      const double ka = key(a), kb = key(b);
                      return ka != kb ? ka > kb : a < b;
                    });
  NeuronProfile profile{layer, neuron, {}};
  for (std::size_t i = 0; i < n; ++i) {
    const auto w = order[i];
    profile.top_words.push_back({w, vocab.word(w), row[w]});
  }
  return profile;
}

}  // namespace

std::vector<Eigen::VectorXd> probe_activations(const distill::MlpModel& model, std::uint32_t word_index,
                                               double scale) {
  if (word_index >= model.arch.input_dim) {
    throw index_out_of_range("word index " + std::to_string(word_index) + " >= V = " +
                             std::to_string(model.arch.input_dim));
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.arch.input_dim));
  x[word_index] = scale;
  return distill::hidden_activations(model, x);
}

std::vector<Eigen::MatrixXd> activation_table(const distill::MlpModel& model, double scale) {
  // A one-hot batch is the scaled identity, so layer 1 is tanh(scale * W1 + b1).
  std::vector<Eigen::MatrixXd> table;
  Eigen::MatrixXd h;
  for (std::size_t l = 0; l < model.num_hidden(); ++l) {
    const auto& layer = model.layers[l];
    Eigen::MatrixXd z = l == 0 ? Eigen::MatrixXd(scale * layer.weights) : Eigen::MatrixXd(layer.weights * h);
    z.colwise() += layer.bias;
    h = z.array().tanh().matrix();
    table.push_back(h);
  }
  return table;
}

NeuronProfile top_words(const distill::MlpModel& model, const corpus::Vocabulary& vocab, std::size_t layer,
                        std::size_t neuron, const ProbeOptions& options) {
  check_vocab(model, vocab);
  if (layer < 1 || layer > model.num_hidden()) {
    throw index_out_of_range("hidden layer " + std::to_string(layer) + " (model has " +
                             std::to_string(model.num_hidden()) + ")");
  }
  if (neuron >= static_cast<std::size_t>(model.layers[layer - 1].bias.size())) {
    throw index_out_of_range("neuron " + std::to_string(neuron) + " in layer " + std::to_string(layer));
  }
  const auto table = activation_table(model, options.scale);
  return rank_row(table[layer - 1].row(static_cast<Eigen::Index>(neuron)), vocab, layer, neuron, options);
}

ProbeReport probe_report(const distill::MlpModel& model, const corpus::Vocabulary& vocab,
                         const ProbeOptions& options) {
  check_vocab(model, vocab);
  const auto table = activation_table(model, options.scale);
  ProbeReport report;
  for (std::size_t l = 0; l < table.size(); ++l) {
    for (Eigen::Index j = 0; j < table[l].rows(); ++j) {
      report.profiles.push_back(rank_row(table[l].row(j), vocab, l + 1, static_cast<std::size_t>(j), options));
    }
  }
  if (model.num_hidden() >= 2) {
    const auto& w2 = model.layers[1].weights;
    const std::size_t keep = std::min<std::size_t>(options.edges_per_neuron, static_cast<std::size_t>(w2.cols()));
    for (Eigen::Index to = 0; to < w2.rows(); ++to) {
      std::vector<Eigen::Index> from(static_cast<std::size_t>(w2.cols()));
      std::iota(from.begin(), from.end(), Eigen::Index{0});
      std::partial_sort(from.begin(), from.begin() + static_cast<std::ptrdiff_t>(keep), from.end(),
                        [&](Eigen::Index a, Eigen::Index b) {
                          return w2(to, a) != w2(to, b) ? w2(to, a) > w2(to, b) : a < b;
                        });
      for (std::size_t i = 0; i < keep; ++i) {
        report.edges.push_back({static_cast<std::size_t>(to), static_cast<std::size_t>(from[i]), w2(to, from[i])});
      }
    }
  }
  return report;
}

void write_probe_report(const ProbeReport& report, const std::filesystem::path& probe_tsv,
                        const std::filesystem::path& edges_tsv) {
  std::ofstream out(probe_tsv);
  if (!out) throw DataError("IoError", "cannot write " + probe_tsv.string());
  for (const auto& p : report.profiles) {
    out << p.layer << '\t' << p.neuron;
    for (const auto& w : p.top_words) out << '\t' << w.word << ':' << fmt::format("{:.6f}", w.activation);
    out << '\n';
  }
  if (report.edges.empty()) return;
  std::ofstream edges(edges_tsv);
  if (!edges) throw DataError("IoError", "cannot write " + edges_tsv.string());
  edges << "layer2_neuron\tlayer1_neuron\tweight\n";
  for (const auto& e : report.edges) edges << fmt::format("{}\t{}\t{:.6f}\n", e.to_neuron, e.from_neuron, e.weight);
}

}  // namespace topicdistill::probe
