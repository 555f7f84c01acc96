#include "qseg/context_index.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <ostream>

#include "qseg/binary_io.hpp"
#include "qseg/errors.hpp"
#include "qseg/random.hpp"

namespace qseg {

namespace {
constexpr std::string_view kIndexMagic = "SQIX1";
}

BigramIndex::BigramIndex(const DocumentSet& docs) : docs_(&docs) {
  if (docs.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error("too many sentences to index");
  }
  for (std::size_t sid = 0; sid < docs.size(); ++sid) {
    const Text& s = docs.sentences[sid];
    for (std::size_t off = 0; off + 1 < s.size(); ++off) {
      postings_[key(s[off], s[off + 1])].push_back(
          {static_cast<std::uint32_t>(sid), static_cast<std::uint32_t>(off)});
    }
  }
}

std::span<const Posting> BigramIndex::postings(Char first, Char second) const {
  auto it = postings_.find(key(first, second));
  if (it == postings_.end()) return {};
  return it->second;
}

void BigramIndex::save(std::ostream& out) const {
  std::vector<std::uint64_t> keys;
  keys.reserve(postings_.size());
  for (const auto& [k, _] : postings_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());

  binary::write_magic(out, kIndexMagic);
  binary::write_u32(out, static_cast<std::uint32_t>(keys.size()));
  for (std::uint64_t k : keys) {
    const Char pair[2] = {static_cast<Char>(k >> 32), static_cast<Char>(k & 0xffffffffu)};
    binary::write_bytes(out, to_utf8(TextView(pair, 2)));
    const auto& list = postings_.at(k);
    binary::write_u32(out, static_cast<std::uint32_t>(list.size()));
    for (const Posting& p : list) {
      binary::write_u32(out, p.sentence);
      binary::write_u32(out, p.offset);
    }
  }
}

BigramIndex BigramIndex::load(std::istream& in, const DocumentSet& docs) {
  binary::expect_magic(in, kIndexMagic);
  BigramIndex index;
  index.docs_ = &docs;
  const std::uint32_t count = binary::read_u32(in);
  for (std::uint32_t b = 0; b < count; ++b) {
    Text bigram = from_utf8(binary::read_bytes(in, 64));
    if (bigram.size() != 2) throw FormatError("index entry is not a bi-gram");
    const std::uint32_t n = binary::read_u32(in);
    std::vector<Posting> list;
    list.reserve(n);
    for (std::uint32_t j = 0; j < n; ++j) {
      Posting p{binary::read_u32(in), binary::read_u32(in)};
      if (p.sentence >= docs.size()) throw FormatError("posting refers to a missing sentence");
      const Text& s = docs.sentences[p.sentence];
      if (std::size_t(p.offset) + 1 >= s.size() || s[p.offset] != bigram[0] ||
          s[p.offset + 1] != bigram[1]) {
        throw FormatError("posting does not match the documents");
      }
      if (!list.empty() && !(list.back() < p)) throw FormatError("posting list not sorted");
      list.push_back(p);
    }
    index.postings_.emplace(key(bigram[0], bigram[1]), std::move(list));
  }
  return index;
}

ContextBag find_contexts(const BigramIndex& index, const Query& q, std::size_t i,
                         const SearchOptions& opts) {
  ContextBag bag;
  bag.cap = opts.cap;
  std::vector<Context> candidates;
  if (i > 0) {
    for (const Posting& p : index.postings(q[i - 1], q[i])) {
      candidates.push_back({p.sentence, p.offset + 1});
    }
  }
  if (i + 1 < q.size()) {
    for (const Posting& p : index.postings(q[i], q[i + 1])) {
      candidates.push_back({p.sentence, p.offset});
    }
  }
  if (opts.exclude_self) {
    std::erase_if(candidates, [&](const Context& c) {
      return index.docs().sentences[c.sentence] == q.chars();
    });
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  if (candidates.size() > opts.cap) {
    Rng rng(opts.seed);
    // Partial Fisher-Yates: the first `cap` slots become a uniform sample.
    for (std::size_t k = 0; k < opts.cap; ++k) {
      std::swap(candidates[k], candidates[k + uniform_below(rng, candidates.size() - k)]);
    }
    candidates.resize(opts.cap);
    std::sort(candidates.begin(), candidates.end());
  }
  bag.items = std::move(candidates);
  return bag;
}

}  // namespace qseg
