// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "topicdistill/corpus.hpp"
#include "topicdistill/lda.hpp"

namespace topicdistill {

struct MixtureRow {
  std::string id;
  TopicMixture mixture;
};

/// One line per document: id, then the K proportions, tab separated with 17
/// significant digits.
void write_theta_tsv(const std::filesystem::path& path, std::span<const MixtureRow> rows);
std::vector<MixtureRow> read_theta_tsv(const std::filesystem::path& path);

/// Reorders `rows` to follow `docs` by id. DataError("MissingDocument") when
/// a document has no row.
std::vector<TopicMixture> join_by_id(std::span<const corpus::LabeledDoc> docs, std::span<const MixtureRow> rows);

}  // namespace topicdistill
