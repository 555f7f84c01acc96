#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "qseg/corpus.hpp"

namespace qseg {

struct LengthRange {
  std::size_t min;
  std::size_t max;
};

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t alphabet_size = 1000;
  Char alphabet_base = 0x4E00;
  std::size_t vocab_size = 200;
  LengthRange word_len{1, 5};
  LengthRange query_len{2, 5};  // words per query
  std::size_t n_train = 2000;
  std::size_t n_test = 500;
  std::size_t n_docs = 3000;
  double oov_fraction = 0.0;
  std::size_t min_contexts = 3;  // document sentences per held-out word
  LengthRange filler_len{1, 3};
  LengthRange words_per_sentence{1, 3};
};

struct SynthCorpus {
  Dictionary dictionary;  // exactly the training words
  std::vector<LabeledQuery> train;
  std::vector<LabeledQuery> test;
  DocumentSet documents;
  std::vector<Text> train_words;
  std::vector<Text> held_out_words;
};

// Throws InfeasibleConfig when the requested corpus cannot be built: too few
// distinct strings for the vocabulary, no training words for a non-empty
// training set, or fewer documents than the held-out words require.
SynthCorpus generate(const SynthConfig& config);

}  // namespace qseg
