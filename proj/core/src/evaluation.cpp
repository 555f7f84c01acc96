#include "qseg/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "qseg/errors.hpp"

namespace qseg {

namespace {

void require_aligned(std::size_t a, std::size_t b) {
  if (a != b) {
    throw LengthMismatch("prediction list has " + std::to_string(a) + " entries, gold has " +
                         std::to_string(b));
  }
}

void require_same_text(const Segmentation& p, const Segmentation& g, std::size_t index) {
  if (p.joined() != g.joined()) {
    throw LengthMismatch("entry " + std::to_string(index + 1) +
                         ": prediction and gold segment different queries");
  }
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

PrfScore segment_prf(std::span<const Segmentation> pred, std::span<const Segmentation> gold) {
  require_aligned(pred.size(), gold.size());
  PrfScore s;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    require_same_text(pred[k], gold[k], k);
    const auto ps = pred[k].spans();
    const auto gs = gold[k].spans();
    const std::set<Segment> gold_spans(gs.begin(), gs.end());
    for (const Segment& sp : ps) s.matched += gold_spans.count(sp);
    s.predicted += ps.size();
    s.gold += gs.size();
  }
  s.precision = ratio(s.matched, s.predicted);
  s.recall = ratio(s.matched, s.gold);
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

double query_accuracy(std::span<const Segmentation> pred, std::span<const Segmentation> gold) {
  require_aligned(pred.size(), gold.size());
  if (pred.empty()) {
    std::fprintf(stderr, "warning: query accuracy of an empty list is defined as 1.0\n");
    return 1.0;
  }
  std::size_t exact = 0;
  for (std::size_t k = 0; k < pred.size(); ++k) exact += pred[k] == gold[k];
  return ratio(exact, pred.size());
}

IvOvRecall recall_iv_ov(std::span<const Segmentation> pred, std::span<const Segmentation> gold,
                        const SegmentVocab& train_vocab) {
  require_aligned(pred.size(), gold.size());
  IvOvRecall r;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    require_same_text(pred[k], gold[k], k);
    const auto ps = pred[k].spans();
    const std::set<Segment> pred_spans(ps.begin(), ps.end());
    const auto gs = gold[k].spans();
    for (std::size_t j = 0; j < gs.size(); ++j) {
      const bool found = pred_spans.count(gs[j]) > 0;
      if (train_vocab.contains(gold[k].segments()[j])) {
        ++r.iv_total;
        r.iv_found += found;
      } else {
        ++r.ov_total;
        r.ov_found += found;
      }
    }
  }
  if (r.iv_total) r.recall_iv = ratio(r.iv_found, r.iv_total);
  if (r.ov_total) r.recall_ov = ratio(r.ov_found, r.ov_total);
  if (r.iv_total + r.ov_total) r.oov_rate = ratio(r.ov_total, r.iv_total + r.ov_total);
  return r;
}

SegmentVocab segment_vocab(std::span<const LabeledQuery> train) {
  SegmentVocab v;
  for (const LabeledQuery& lq : train) v.insert(lq.gold.segments().begin(), lq.gold.segments().end());
  return v;
}

Metrics evaluate(std::span<const Segmentation> pred, std::span<const Segmentation> gold,
                 const SegmentVocab* train_vocab) {
  const PrfScore prf = segment_prf(pred, gold);
  Metrics m;
  m.precision = prf.precision;
  m.recall = prf.recall;
  m.f1 = prf.f1;
  m.matched = prf.matched;
  m.predicted = prf.predicted;
  m.gold = prf.gold;
  m.queries = pred.size();
  m.query_accuracy = query_accuracy(pred, gold);
  if (train_vocab) {
    const IvOvRecall r = recall_iv_ov(pred, gold, *train_vocab);
    m.recall_iv = r.recall_iv;
    m.recall_ov = r.recall_ov;
    m.oov_rate = r.oov_rate;
  }
  return m;
}

namespace {

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fixed(const std::optional<double>& v) { return v ? fixed(*v) : std::string("n/a"); }

}  // namespace

std::string format_report_text(const Metrics& m) {
  std::string out;
  out += "queries          " + std::to_string(m.queries) + "\n";
  out += "segments         gold " + std::to_string(m.gold) + ", predicted " +
         std::to_string(m.predicted) + ", matched " + std::to_string(m.matched) + "\n";
  out += "precision        " + fixed(m.precision) + "\n";
  out += "recall           " + fixed(m.recall) + "\n";
  out += "f1               " + fixed(m.f1) + "\n";
  out += "query accuracy   " + fixed(m.query_accuracy) + "\n";
  if (m.oov_rate || m.recall_iv || m.recall_ov) {
    out += "recall-IV        " + fixed(m.recall_iv) + "\n";
    out += "recall-OV        " + fixed(m.recall_ov) + "\n";
    out += "OOV rate         " + fixed(m.oov_rate) + "\n";
  }
  return out;
}

std::string format_report_kv(const Metrics& m) {
  std::string out;
  out += "queries=" + std::to_string(m.queries) + "\n";
  out += "gold_segments=" + std::to_string(m.gold) + "\n";
  out += "predicted_segments=" + std::to_string(m.predicted) + "\n";
  out += "matched_segments=" + std::to_string(m.matched) + "\n";
  out += "precision=" + fixed(m.precision) + "\n";
  out += "recall=" + fixed(m.recall) + "\n";
  out += "f1=" + fixed(m.f1) + "\n";
  out += "query_accuracy=" + fixed(m.query_accuracy) + "\n";
  if (m.recall_iv) out += "recall_iv=" + fixed(*m.recall_iv) + "\n";
  if (m.recall_ov) out += "recall_ov=" + fixed(*m.recall_ov) + "\n";
  if (m.oov_rate) out += "oov_rate=" + fixed(*m.oov_rate) + "\n";
  return out;
}

}  // namespace qseg
