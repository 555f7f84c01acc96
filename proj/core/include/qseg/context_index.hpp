#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <unordered_map>
#include <vector>

#include "qseg/corpus.hpp"

namespace qseg {

struct Posting {
  std::uint32_t sentence;
  std::uint32_t offset;  // start of the bi-gram within the sentence
  friend bool operator==(const Posting&, const Posting&) = default;
  friend auto operator<=>(const Posting&, const Posting&) = default;
};

// Inverted index from character bi-grams to their occurrences. Holds a
// reference to the documents, which must outlive it.
class BigramIndex {
 public:
  explicit BigramIndex(const DocumentSet& docs);

  const DocumentSet& docs() const { return *docs_; }
  std::span<const Posting> postings(Char first, Char second) const;
  std::size_t bigram_count() const { return postings_.size(); }

  // "SQIX1", bi-gram count, then per bi-gram (sorted by code points): its
  // length-prefixed UTF-8 text and a counted list of (sentence, offset) pairs.
  void save(std::ostream& out) const;
  // Validates every posting against `docs`.
  static BigramIndex load(std::istream& in, const DocumentSet& docs);

  friend bool operator==(const BigramIndex& a, const BigramIndex& b) {
    return a.postings_ == b.postings_;
  }

 private:
  BigramIndex() = default;
  static std::uint64_t key(Char a, Char b) {
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
  }

  const DocumentSet* docs_ = nullptr;
  std::unordered_map<std::uint64_t, std::vector<Posting>> postings_;
};

// One context: the query character sits at `center` of sentence `sentence`.
struct Context {
  std::uint32_t sentence;
  std::uint32_t center;
  friend bool operator==(const Context&, const Context&) = default;
  friend auto operator<=>(const Context&, const Context&) = default;
};

struct ContextBag {
  std::vector<Context> items;
  std::size_t cap = 0;
};

struct SearchOptions {
  std::size_t cap = 5;
  std::uint64_t seed = 0;
  // Skip sentences identical to the query.
  bool exclude_self = false;
};

// Contexts of q[i]: occurrences of the left bi-gram q[i-1]q[i] and the right
// bi-gram q[i]q[i+1], deduplicated by (sentence, center), sorted, and
// subsampled without replacement down to `cap` when there are more.
ContextBag find_contexts(const BigramIndex& index, const Query& q, std::size_t i,
                         const SearchOptions& opts);

}  // namespace qseg
