#include "qseg/distant_labeler.hpp"

#include <algorithm>

namespace qseg {

std::optional<Segmentation> forward_max_match(const Query& q, const Dictionary& dict) {
  const Text& chars = q.chars();
  std::vector<Text> segments;
  std::size_t pos = 0;
  while (pos < chars.size()) {
    std::size_t len = std::min(dict.max_entry_len(), chars.size() - pos);
    while (len > 0 && !dict.contains(TextView(chars).substr(pos, len))) --len;
    if (len == 0) return std::nullopt;
    segments.push_back(chars.substr(pos, len));
    pos += len;
  }
  return Segmentation(std::move(segments));
}

AutolabelResult autolabel_corpus(std::span<const Query> queries, const Dictionary& dict) {
  AutolabelResult result;
  result.total = queries.size();
  for (const Query& q : queries) {
    if (auto seg = forward_max_match(q, dict)) {
      result.labeled.push_back({q, std::move(*seg)});
    }
  }
  return result;
}

}  // namespace qseg
