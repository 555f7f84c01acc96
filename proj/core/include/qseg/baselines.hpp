#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>

#include "qseg/corpus.hpp"

namespace qseg {

inline constexpr std::size_t kDefaultNgramMax = 7;

struct NgramStats {
  std::unordered_map<Text, std::uint64_t> counts;  // n-grams of length 1..max_len
  std::uint64_t total_unigrams = 0;
  std::size_t max_len = kDefaultNgramMax;

  std::uint64_t count(TextView s) const;
};

// Throws NoSourceEnabled when both flags are false.
NgramStats build_stats(std::span<const Query> queries, const DocumentSet& docs, bool use_queries,
                       bool use_documents, std::size_t max_len = kDefaultNgramMax);

inline constexpr double kMiSmoothing = 0.5;

// log(count + 1), plus for multi-character segments the weakest-link mutual
// information min_p log((c + e) * total / ((c_left + e) * (c_right + e))).
double segment_score(TextView seg, const NgramStats& stats);

// Maximizes the summed segment score. Ties go to fewer segments, then to the
// lexicographically smaller list of cut positions.
Segmentation uns_segment(const Query& q, const NgramStats& stats);

// Cut positions (exclusive segment ends, last one excluded) of a segmentation.
std::vector<std::size_t> cut_positions(const Segmentation& seg);

// Summed segment score, accumulated left to right.
double segmentation_score(const Segmentation& seg, const NgramStats& stats);

// Forward max-match with singleton segments where no entry matches.
Segmentation maxmatch_segment(const Query& q, const Dictionary& dict);

}  // namespace qseg
