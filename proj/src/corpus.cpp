// SPDX-License-Identifier: Apache-2.0
#include "topicdistill/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "topicdistill/error.hpp"

namespace topicdistill::corpus {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (current.size() >= 2) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char c : text) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) {
      current.push_back(static_cast<char>(c | 0x20));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

Vocabulary Vocabulary::build(std::span<const RawDocument> docs, std::int64_t min_word_freq) {
  if (min_word_freq < 1) throw DataError("InvalidArgument", "min_word_freq must be >= 1");
  std::unordered_map<std::string, std::int64_t> freq;
  for (const auto& doc : docs) {
    for (auto& tok : tokenize(doc.text)) ++freq[std::move(tok)];
  }
  std::vector<std::pair<std::string, std::int64_t>> kept;
  for (auto& [word, count] : freq) {
    if (count >= min_word_freq) kept.emplace_back(word, count);
  }
  if (kept.empty()) {
    throw DataError("EmptyVocabulary",
                    "no token reaches frequency " + std::to_string(min_word_freq));
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> words;
  words.reserve(kept.size());
  for (auto& [word, count] : kept) words.push_back(std::move(word));
  return from_words(std::move(words), min_word_freq);
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words, std::int64_t min_freq) {
  Vocabulary v;
  v.min_freq_ = min_freq;
  v.index_.reserve(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (!v.index_.emplace(words[i], static_cast<std::uint32_t>(i)).second) {
      throw DataError("DuplicateWord", "word '" + words[i] + "' appears twice");
    }
  }
  v.words_ = std::move(words);
  return v;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TfVector::TfVector(std::vector<Entry> entries) {
  std::sort(entries.begin(), entries.end());
  for (const auto& [index, count] : entries) {
    if (count == 0) continue;
    if (!entries_.empty() && entries_.back().first == index) {
      entries_.back().second += count;
    } else {
      entries_.emplace_back(index, count);
    }
    total_ += count;
  }
}

std::vector<RawDocument> filter_documents(std::span<const RawDocument> docs, std::size_t min_length) {
  std::vector<RawDocument> kept;
  for (const auto& doc : docs) {
    if (tokenize(doc.text).size() >= min_length) kept.push_back(doc);
  }
  return kept;
}

TfVector vectorize(const RawDocument& doc, const Vocabulary& vocab) {
  std::map<std::uint32_t, std::uint32_t> counts;
  for (const auto& tok : tokenize(doc.text)) {
    if (auto index = vocab.find(tok)) ++counts[*index];
  }
  return TfVector(std::vector<TfVector::Entry>(counts.begin(), counts.end()));
}

std::size_t Dataset::label_index(std::string_view label) const {
  auto it = std::lower_bound(labels.begin(), labels.end(), label);
  if (it == labels.end() || *it != label) {
    throw DataError("UnknownLabel", "label '" + std::string(label) + "' not in dataset");
  }
  return static_cast<std::size_t>(it - labels.begin());
}

const std::vector<LabeledDoc>& Dataset::split(std::string_view name) const {
  if (name == "train") return train;
  if (name == "test") return test;
  throw DataError("UnknownSplit", "split '" + std::string(name) + "' (expected train or test)");
}

std::vector<RawDocument> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("IoError", "cannot open " + path.string());
  const std::string source = path.string();
  std::vector<RawDocument> docs;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(source, lineno, e.what());
    }
    RawDocument doc;
    try {
      doc.id = obj.at("id").get<std::string>();
      doc.label = obj.at("label").get<std::string>();
      doc.text = obj.at("text").get<std::string>();
      doc.split = obj.at("split").get<std::string>();
    } catch (const json::exception& e) {
      throw ParseError(source, lineno, e.what());
    }
    if (doc.label.empty()) throw ParseError(source, lineno, "empty label");
    if (doc.label.find_first_of(" \t\r\n") != std::string::npos) {
      throw ParseError(source, lineno, "label contains whitespace");
    }
    if (doc.split != "train" && doc.split != "test") {
      throw DataError("UnknownSplit", source + ":" + std::to_string(lineno) + ": split '" +
                                          doc.split + "'");
    }
    if (!seen.insert(doc.id).second) {
      throw ParseError(source, lineno, "duplicate document id '" + doc.id + "'");
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

Dataset build_dataset(std::span<const RawDocument> docs, const PrepareOptions& options) {
  const auto kept = filter_documents(docs, options.min_doc_len);
  std::vector<RawDocument> train_docs;
  for (const auto& d : kept) {
    if (d.split == "train") train_docs.push_back(d);
  }
  Dataset ds;
  ds.min_doc_len = options.min_doc_len;
  ds.min_word_freq = options.min_word_freq;
  ds.vocabulary = Vocabulary::build(train_docs, options.min_word_freq);
  std::set<std::string> labels;
  for (const auto& d : kept) {
    auto& target = d.split == "train" ? ds.train : ds.test;
    target.push_back({d.id, d.label, vectorize(d, ds.vocabulary)});
    labels.insert(d.label);
  }
  ds.labels.assign(labels.begin(), labels.end());
  return ds;
}

Dataset load_dataset(const fs::path& path, std::string_view format, const PrepareOptions& options) {
  if (format != "jsonl") throw DataError("UnknownFormat", "format '" + std::string(format) + "'");
  const auto docs = read_jsonl(path);
  return build_dataset(docs, options);
}

std::string format_tf_line(std::string_view label, const TfVector& tf) {
  std::string line(label);
  for (const auto& [index, count] : tf.entries()) {
    line += ' ';
    line += std::to_string(index);
    line += ':';
    line += std::to_string(count);
  }
  return line;
}

namespace {

void write_split(const std::vector<LabeledDoc>& docs, const fs::path& tf_path, const fs::path& ids_path) {
  std::ofstream tf(tf_path), ids(ids_path);
  if (!tf || !ids) throw DataError("IoError", "cannot write " + tf_path.string());
  for (const auto& d : docs) {
    tf << format_tf_line(d.label, d.tf) << '\n';
    ids << d.id << '\n';
  }
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("IoError", "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

template <typename T>
T parse_number(std::string_view text, const std::string& source, std::size_t lineno) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError(source, lineno, "bad number '" + std::string(text) + "'");
  }
  return value;
}

std::vector<LabeledDoc> read_split(const fs::path& tf_path, const fs::path& ids_path, std::size_t V) {
  const auto lines = read_lines(tf_path);
  const auto ids = read_lines(ids_path);
  if (lines.size() != ids.size()) {
    throw DataError("LengthMismatch", tf_path.string() + " and " + ids_path.string() +
                                          " have different line counts");
  }
  const std::string source = tf_path.string();
  std::vector<LabeledDoc> docs;
  docs.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::istringstream fields(lines[i]);
    LabeledDoc doc;
    doc.id = ids[i];
    if (!(fields >> doc.label)) throw ParseError(source, i + 1, "missing label");
    std::vector<TfVector::Entry> entries;
    std::string pair;
    while (fields >> pair) {
      const auto colon = pair.find(':');
      if (colon == std::string::npos) throw ParseError(source, i + 1, "expected index:count");
      const auto index = parse_number<std::uint32_t>(std::string_view(pair).substr(0, colon), source, i + 1);
      const auto count = parse_number<std::uint32_t>(std::string_view(pair).substr(colon + 1), source, i + 1);
      if (index >= V) throw ParseError(source, i + 1, "index " + std::to_string(index) + " >= V");
      if (count == 0) throw ParseError(source, i + 1, "zero count");
      if (!entries.empty() && entries.back().first >= index) {
        throw ParseError(source, i + 1, "indices must be strictly ascending");
      }
      entries.emplace_back(index, count);
    }
    doc.tf = TfVector(std::move(entries));
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace

void save_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream vocab(dir / "vocab.txt");
    for (const auto& w : ds.vocabulary.words()) vocab << w << '\n';
  }
  write_split(ds.train, dir / "train.tf", dir / "train.ids");
  write_split(ds.test, dir / "test.tf", dir / "test.ids");
  json meta = {
      {"V", ds.vocabulary.size()},
      {"min_doc_len", ds.min_doc_len},
      {"min_word_freq", ds.min_word_freq},
      {"train_documents", ds.train.size()},
      {"test_documents", ds.test.size()},
      {"labels", ds.labels},
  };
  std::ofstream(dir / "meta.json") << meta.dump(2) << '\n';
}

Dataset read_dataset(const fs::path& dir) {
  std::ifstream meta_in(dir / "meta.json");
  if (!meta_in) throw DataError("IoError", "cannot open " + (dir / "meta.json").string());
  json meta;
  try {
    meta = json::parse(meta_in);
  } catch (const json::exception& e) {
    throw ParseError((dir / "meta.json").string(), 0, e.what());
  }
  Dataset ds;
  ds.min_doc_len = meta.value("min_doc_len", std::size_t{0});
  ds.min_word_freq = meta.value("min_word_freq", std::int64_t{1});
  ds.vocabulary = Vocabulary::from_words(read_lines(dir / "vocab.txt"), ds.min_word_freq);
  if (meta.contains("V") && meta["V"].get<std::size_t>() != ds.vocabulary.size()) {
    throw dimension_mismatch("meta.json V disagrees with vocab.txt");
  }
  const std::size_t V = ds.vocabulary.size();
  ds.train = read_split(dir / "train.tf", dir / "train.ids", V);
  ds.test = read_split(dir / "test.tf", dir / "test.ids", V);
  std::set<std::string> labels;
  for (const auto* split : {&ds.train, &ds.test}) {
    for (const auto& d : *split) labels.insert(d.label);
  }
  ds.labels.assign(labels.begin(), labels.end());
  return ds;
}

}  // namespace topicdistill::corpus
