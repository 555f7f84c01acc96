#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>

#include "qseg/corpus.hpp"

namespace qseg {

struct PrfScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t matched = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
};

struct IvOvRecall {
  std::optional<double> recall_iv;  // absent when no gold segment is IV
  std::optional<double> recall_ov;  // absent when no gold segment is OV
  std::optional<double> oov_rate;   // absent when there are no gold segments
  std::size_t iv_total = 0, iv_found = 0;
  std::size_t ov_total = 0, ov_found = 0;
};

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double query_accuracy = 0.0;
  std::optional<double> recall_iv;
  std::optional<double> recall_ov;
  std::optional<double> oov_rate;
  std::size_t matched = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
  std::size_t queries = 0;
};

using SegmentVocab = std::unordered_set<Text>;

// Segments are identified by their character span within the query.
PrfScore segment_prf(std::span<const Segmentation> pred, std::span<const Segmentation> gold);

// An empty list scores 1.0.
double query_accuracy(std::span<const Segmentation> pred, std::span<const Segmentation> gold);

// IV/OV membership is by segment string against `train_vocab`.
IvOvRecall recall_iv_ov(std::span<const Segmentation> pred, std::span<const Segmentation> gold,
                        const SegmentVocab& train_vocab);

SegmentVocab segment_vocab(std::span<const LabeledQuery> train);

// All of the above; IV/OV fields are filled only when a vocabulary is given.
Metrics evaluate(std::span<const Segmentation> pred, std::span<const Segmentation> gold,
                 const SegmentVocab* train_vocab = nullptr);

std::string format_report_text(const Metrics& m);
std::string format_report_kv(const Metrics& m);

}  // namespace qseg
