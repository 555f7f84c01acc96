#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "qseg/corpus.hpp"

namespace qseg {

// Left-to-right greedy longest match. Returns nullopt as soon as a position
// has no dictionary entry starting there.
std::optional<Segmentation> forward_max_match(const Query& q, const Dictionary& dict);

struct AutolabelResult {
  std::vector<LabeledQuery> labeled;
  std::size_t total = 0;

  std::size_t covered() const { return labeled.size(); }
  double coverage() const {
    return total == 0 ? 0.0 : static_cast<double>(labeled.size()) / static_cast<double>(total);
  }
};

// Keeps only the queries the dictionary fully covers, in input order.
AutolabelResult autolabel_corpus(std::span<const Query> queries, const Dictionary& dict);

}  // namespace qseg
