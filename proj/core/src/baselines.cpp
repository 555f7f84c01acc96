#include "qseg/baselines.hpp"

#include <cmath>
#include <limits>

#include "qseg/errors.hpp"

namespace qseg {

std::uint64_t NgramStats::count(TextView s) const {
  if (s.empty() || s.size() > max_len) return 0;
  const auto it = counts.find(Text(s));
  return it == counts.end() ? 0 : it->second;
}

namespace {

void count_ngrams(TextView text, NgramStats& stats) {
  stats.total_unigrams += text.size();
  for (std::size_t i = 0; i < text.size(); ++i) {
    for (std::size_t n = 1; n <= stats.max_len && i + n <= text.size(); ++n) {
      ++stats.counts[Text(text.substr(i, n))];
    }
  }
}

}  // namespace

NgramStats build_stats(std::span<const Query> queries, const DocumentSet& docs, bool use_queries,
                       bool use_documents, std::size_t max_len) {
  if (!use_queries && !use_documents) throw NoSourceEnabled("no statistics source enabled");
  if (max_len < 1) throw Error("n-gram length must be at least 1");
  NgramStats stats;
  stats.max_len = max_len;
  if (use_queries) {
    for (const Query& q : queries) count_ngrams(q.chars(), stats);
  }
  if (use_documents) {
    for (const Text& s : docs.sentences) count_ngrams(s, stats);
  }
  return stats;
}

double segment_score(TextView seg, const NgramStats& stats) {
  const auto c = static_cast<double>(stats.count(seg));
  double score = std::log(c + 1.0);
  if (seg.size() < 2) return score;
  const double total = static_cast<double>(stats.total_unigrams);
  double mi = std::numeric_limits<double>::infinity();
  for (std::size_t p = 1; p < seg.size(); ++p) {
    const auto cl = static_cast<double>(stats.count(seg.substr(0, p)));
    const auto cr = static_cast<double>(stats.count(seg.substr(p)));
    mi = std::min(mi, std::log((c + kMiSmoothing) * total /
                               ((cl + kMiSmoothing) * (cr + kMiSmoothing))));
  }
  return score + mi;
}

Segmentation uns_segment(const Query& q, const NgramStats& stats) {
  const TextView text = q.chars();
  const std::size_t n = text.size();
  struct Cell {
    double score = -std::numeric_limits<double>::infinity();
    std::size_t segments = 0;
    std::vector<std::size_t> cuts;
    bool reached = false;
  };
  std::vector<Cell> best(n + 1);
  best[0].score = 0.0;
  best[0].reached = true;

  for (std::size_t j = 1; j <= n; ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      const Cell& prev = best[i];
      if (!prev.reached) continue;
      const double score = prev.score + segment_score(text.substr(i, j - i), stats);
      const std::size_t segments = prev.segments + 1;
      Cell& cur = best[j];
      bool take = !cur.reached || score > cur.score;
      if (!take && score == cur.score) {
        if (segments != cur.segments) {
          take = segments < cur.segments;
        } else {
          std::vector<std::size_t> cuts = prev.cuts;
          if (i > 0) cuts.push_back(i);
          take = cuts < cur.cuts;
        }
      }
      if (take) {
        cur.score = score;
        cur.segments = segments;
        cur.cuts = prev.cuts;
        if (i > 0) cur.cuts.push_back(i);
        cur.reached = true;
      }
    }
  }

  std::vector<Text> segments;
  std::size_t begin = 0;
  for (std::size_t cut : best[n].cuts) {
    segments.emplace_back(text.substr(begin, cut - begin));
    begin = cut;
  }
  segments.emplace_back(text.substr(begin));
  return Segmentation(std::move(segments));
}

std::vector<std::size_t> cut_positions(const Segmentation& seg) {
  std::vector<std::size_t> cuts;
  const auto spans = seg.spans();
  for (std::size_t k = 0; k + 1 < spans.size(); ++k) cuts.push_back(spans[k].end);
  return cuts;
}

double segmentation_score(const Segmentation& seg, const NgramStats& stats) {
  double total = 0.0;
  for (const Text& s : seg.segments()) total += segment_score(s, stats);
  return total;
}

Segmentation maxmatch_segment(const Query& q, const Dictionary& dict) {
  const TextView text = q.chars();
  std::vector<Text> segments;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t len = 1;
    for (std::size_t n = std::min(dict.max_entry_len(), text.size() - i); n >= 1; --n) {
      if (dict.contains(text.substr(i, n))) {
        len = n;
        break;
      }
    }
    segments.emplace_back(text.substr(i, len));
    i += len;
  }
  return Segmentation(std::move(segments));
}

}  // namespace qseg
