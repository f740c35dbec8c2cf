// SPDX-License-Identifier: Apache-2.0
//
// Corpus ingestion: tokenization, frequency-thresholded vocabulary, document
// length filtering and term-frequency vectors.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace topicdistill::corpus {

struct RawDocument {
  std::string id;
  std::string label;
  std::string text;
  std::string split;  // "train" or "test"; empty when not read from a corpus file
};

/// Lowercased alphabetic runs of length >= 2. Any non-alphabetic character
/// (digits included) separates tokens.
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
 public:
  Vocabulary() = default;

  /// Words with corpus frequency >= min_word_freq, most frequent first, ties
  /// broken lexicographically. Throws DataError("EmptyVocabulary") when
  /// nothing survives.
  static Vocabulary build(std::span<const RawDocument> docs, std::int64_t min_word_freq);

  /// Wraps an already ordered word list (e.g. read back from vocab.txt).
  static Vocabulary from_words(std::vector<std::string> words, std::int64_t min_freq);

  std::size_t size() const noexcept { return words_.size(); }
  const std::vector<std::string>& words() const noexcept { return words_; }
  const std::string& word(std::size_t index) const { return words_.at(index); }
  std::optional<std::uint32_t> find(std::string_view word) const;
  std::int64_t min_freq() const noexcept { return min_freq_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::int64_t min_freq_ = 1;
};

/// Sparse raw term counts. Entries are sorted by ascending word index and
/// every stored count is >= 1.
class TfVector {
 public:
  using Entry = std::pair<std::uint32_t, std::uint32_t>;  // (word index, count)

  TfVector() = default;
  /// Accepts entries in any order; duplicate indices are merged and zero
  /// counts dropped.
  explicit TfVector(std::vector<Entry> entries);

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t nnz() const noexcept { return entries_.size(); }
  std::uint64_t total() const noexcept { return total_; }
  bool empty() const noexcept { return total_ == 0; }
  /// One past the largest stored index (0 for an empty vector).
  std::uint32_t dimension_bound() const noexcept {
    return entries_.empty() ? 0 : entries_.back().first + 1;
  }

  friend bool operator==(const TfVector&, const TfVector&) = default;

 private:
  std::vector<Entry> entries_;
  std::uint64_t total_ = 0;
};

/// Keeps documents with at least min_length tokens, in input order.
std::vector<RawDocument> filter_documents(std::span<const RawDocument> docs, std::size_t min_length);

/// Counts in-vocabulary tokens; out-of-vocabulary tokens are dropped. The
/// result is empty() when no token is in the vocabulary.
TfVector vectorize(const RawDocument& doc, const Vocabulary& vocab);

struct LabeledDoc {
  std::string id;
  std::string label;
  TfVector tf;
};

struct Dataset {
  Vocabulary vocabulary;
  std::vector<LabeledDoc> train;
  std::vector<LabeledDoc> test;
  std::vector<std::string> labels;  // sorted distinct class names
  std::size_t min_doc_len = 0;
  std::int64_t min_word_freq = 1;

  std::size_t label_index(std::string_view label) const;
  const std::vector<LabeledDoc>& split(std::string_view name) const;
};

struct PrepareOptions {
  std::size_t min_doc_len = 0;
  std::int64_t min_word_freq = 1;
};

/// Reads the JSON Lines corpus ({"id","label","text","split"} per line).
/// Throws ParseError with the line number and DataError("UnknownSplit").
std::vector<RawDocument> read_jsonl(const std::filesystem::path& path);

/// filter -> vocabulary from the training split -> vectorize both splits.
Dataset build_dataset(std::span<const RawDocument> docs, const PrepareOptions& options);

/// read_jsonl + build_dataset. Only the "jsonl" format is supported.
Dataset load_dataset(const std::filesystem::path& path, std::string_view format,
                     const PrepareOptions& options);

/// Writes vocab.txt, train.tf, test.tf, train.ids, test.ids and meta.json.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

/// One line of a .tf file: label followed by ascending index:count pairs.
std::string format_tf_line(std::string_view label, const TfVector& tf);

}  // namespace topicdistill::corpus
