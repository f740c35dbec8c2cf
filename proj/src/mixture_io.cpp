// SPDX-License-Identifier: Apache-2.0
#include "topicdistill/mixture_io.hpp"

#include <charconv>
#include <fstream>
#include <unordered_map>

#include <fmt/format.h>

#include "topicdistill/error.hpp"

namespace topicdistill {

void write_theta_tsv(const std::filesystem::path& path, std::span<const MixtureRow> rows) {
  std::ofstream out(path);
  if (!out) throw DataError("IoError", "cannot write " + path.string());
  for (const auto& row : rows) {
    out << row.id;
    for (double t : row.mixture.theta) out << '\t' << fmt::format("{:.17g}", t);
    out << '\n';
  }
}

std::vector<MixtureRow> read_theta_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("IoError", "cannot open " + path.string());
  std::vector<MixtureRow> rows;
  std::string line;
  std::size_t lineno = 0;
  std::size_t K = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    MixtureRow row;
    std::size_t pos = line.find('\t');
    row.id = line.substr(0, pos);
    while (pos != std::string::npos) {
      const std::size_t start = pos + 1;
      pos = line.find('\t', start);
      const std::string_view field(line.data() + start, (pos == std::string::npos ? line.size() : pos) - start);
      double value = 0.0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
      if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw ParseError(path.string(), lineno, "bad proportion '" + std::string(field) + "'");
      }
      row.mixture.theta.push_back(value);
    }
    if (row.mixture.size() == 0) throw ParseError(path.string(), lineno, "no proportions");
    if (K == 0) K = row.mixture.size();
    if (row.mixture.size() != K) throw ParseError(path.string(), lineno, "inconsistent number of topics");
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<TopicMixture> join_by_id(std::span<const corpus::LabeledDoc> docs, std::span<const MixtureRow> rows) {
  std::unordered_map<std::string, const TopicMixture*> by_id;
  for (const auto& r : rows) by_id.emplace(r.id, &r.mixture);
  std::vector<TopicMixture> out;
  out.reserve(docs.size());
  for (const auto& d : docs) {
    auto it = by_id.find(d.id);
    if (it == by_id.end()) throw DataError("MissingDocument", "no topic mixture for document '" + d.id + "'");
    out.push_back(*it->second);
  }
  return out;
}

}  // namespace topicdistill
