#include "qseg/synth.hpp"

#include <algorithm>
#include <array>
#include <span>
#include <string>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "qseg/distant_labeler.hpp"
#include "qseg/errors.hpp"
#include "qseg/random.hpp"

namespace qseg {
namespace {

constexpr std::size_t kMaxAttempts = 1000;

void check_range(const LengthRange& r, const char* what, std::size_t min_allowed) {
  if (r.min < min_allowed || r.max < r.min) {
    throw InfeasibleConfig(std::string("invalid ") + what + " range");
  }
}

// Lengths 2-4 dominate, 1 and 5+ are rarer.
double length_weight(std::size_t len) {
  switch (len) {
    case 1: return 1.0;
    case 2: return 4.0;
    case 3: return 4.0;
    case 4: return 3.0;
    default: return 1.0;
  }
}

std::size_t sample_length(Rng& rng, const LengthRange& r) {
  double total = 0.0;
  for (std::size_t n = r.min; n <= r.max; ++n) total += length_weight(n);
  double x = uniform_unit(rng) * total;
  for (std::size_t n = r.min; n < r.max; ++n) {
    x -= length_weight(n);
    if (x < 0) return n;
  }
  return r.max;
}

// Number of distinct strings with lengths in r, saturating.
std::size_t string_capacity(std::size_t alphabet, const LengthRange& r) {
  constexpr std::size_t kMax = std::numeric_limits<std::size_t>::max();
  std::size_t total = 0;
  std::size_t power = 1;
  for (std::size_t n = 1; n <= r.max; ++n) {
    power = power > kMax / alphabet ? kMax : power * alphabet;
    if (n >= r.min) total = total > kMax - power ? kMax : total + power;
  }
  return total;
}

Char random_char(Rng& rng, const SynthConfig& c) {
  return c.alphabet_base + static_cast<Char>(uniform_below(rng, c.alphabet_size));
}

// True if w splits into two or more words of `words`, none equal to w itself.
bool is_concatenation(const Text& w, const std::unordered_set<Text>& words) {
  const std::size_t n = w.size();
  // reach[i][k]: prefix of length i is covered by k words (k capped at 2).
  std::vector<std::array<bool, 3>> reach(n + 1, {false, false, false});
  reach[0][0] = true;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < 3; ++k) {
      if (!reach[i][k]) continue;
      for (std::size_t j = i + 1; j <= n; ++j) {
        if (i == 0 && j == n) continue;
        if (words.contains(w.substr(i, j - i))) reach[j][std::min<std::size_t>(k + 1, 2)] = true;
      }
    }
  }
  return reach[n][2];
}

std::vector<Text> sample_vocabulary(Rng& rng, const SynthConfig& c) {
  std::vector<Text> words;
  std::unordered_set<Text> set;
  std::size_t failures = 0;
  while (words.size() < c.vocab_size) {
    const std::size_t len = sample_length(rng, c.word_len);
    Text w;
    for (std::size_t k = 0; k < len; ++k) w.push_back(random_char(rng, c));
    bool ok = !set.contains(w) && !is_concatenation(w, set);
    if (ok) {
      // The new word must not complete a concatenation for an existing one.
      set.insert(w);
      for (const Text& other : words) {
        if (other.size() > w.size() && is_concatenation(other, set)) {
          ok = false;
          break;
        }
      }
      if (!ok) set.erase(w);
    }
    if (ok) {
      words.push_back(std::move(w));
      failures = 0;
    } else if (++failures > kMaxAttempts) {
      throw InfeasibleConfig("cannot sample " + std::to_string(c.vocab_size) +
                             " unambiguous words from the alphabet");
    }
  }
  return words;
}

LabeledQuery make_query(std::vector<Text> words) {
  Text chars;
  for (const Text& w : words) chars += w;
  return LabeledQuery{Query(std::move(chars)), Segmentation(std::move(words))};
}

Text filler(Rng& rng, const SynthConfig& c) {
  Text out;
  const std::size_t n = uniform_between(rng, c.filler_len.min, c.filler_len.max);
  for (std::size_t k = 0; k < n; ++k) out.push_back(random_char(rng, c));
  return out;
}

Text sentence(Rng& rng, const SynthConfig& c, std::span<const Text> words,
              const Text* required) {
  std::size_t n_words = uniform_between(rng, c.words_per_sentence.min, c.words_per_sentence.max);
  std::size_t required_at = required ? uniform_below(rng, n_words) : n_words;
  Text out = filler(rng, c);
  for (std::size_t k = 0; k < n_words; ++k) {
    out += k == required_at ? *required : words[uniform_below(rng, words.size())];
    out += filler(rng, c);
  }
  return out;
}

}  // namespace

SynthCorpus generate(const SynthConfig& c) {
  if (!(c.oov_fraction >= 0.0 && c.oov_fraction <= 1.0)) {
    throw InfeasibleConfig("oov_fraction must be in [0, 1]");
  }
  if (c.alphabet_size < 1) throw InfeasibleConfig("alphabet must not be empty");
  if (c.alphabet_base + c.alphabet_size > 0xD800 && c.alphabet_base < 0xE000) {
    throw InfeasibleConfig("alphabet overlaps the surrogate range");
  }
  check_range(c.word_len, "word length", 1);
  check_range(c.query_len, "query length", 1);
  check_range(c.filler_len, "filler length", 0);
  check_range(c.words_per_sentence, "words per sentence", 1);
  if (c.vocab_size < 1) throw InfeasibleConfig("vocabulary must not be empty");
  if (c.vocab_size > string_capacity(c.alphabet_size, c.word_len)) {
    throw InfeasibleConfig("vocab_size exceeds the number of distinct strings available");
  }

  Rng vocab_rng(mix_seed(c.seed, 1));
  Rng query_rng(mix_seed(c.seed, 2));
  Rng doc_rng(mix_seed(c.seed, 3));

  SynthCorpus out;
  std::vector<Text> vocab = sample_vocabulary(vocab_rng, c);
  const auto n_held = static_cast<std::size_t>(
      std::llround(c.oov_fraction * static_cast<double>(vocab.size())));
  out.held_out_words.assign(vocab.begin(), vocab.begin() + static_cast<std::ptrdiff_t>(n_held));
  out.train_words.assign(vocab.begin() + static_cast<std::ptrdiff_t>(n_held), vocab.end());
  for (const Text& w : out.train_words) out.dictionary.insert(w);

  if (c.n_train > 0 && out.train_words.empty()) {
    throw InfeasibleConfig("no training words left after holding out");
  }
  if (n_held * c.min_contexts > c.n_docs) {
    throw InfeasibleConfig("n_docs too small to give every held-out word " +
                           std::to_string(c.min_contexts) + " contexts");
  }

  // Training queries whose dictionary max-match differs from the generating
  // words are resampled, so autolabeling reproduces the gold labels.
  std::unordered_set<Text> seen;
  std::size_t failures = 0;
  while (out.train.size() < c.n_train) {
    const std::size_t len = uniform_between(query_rng, c.query_len.min, c.query_len.max);
    std::vector<Text> words;
    for (std::size_t k = 0; k < len; ++k) {
      words.push_back(out.train_words[uniform_below(query_rng, out.train_words.size())]);
    }
    LabeledQuery lq = make_query(words);
    const auto mm = forward_max_match(lq.query, out.dictionary);
    if (mm && *mm == lq.gold) {
      for (const Text& w : words) seen.insert(w);
      out.train.push_back(std::move(lq));
      failures = 0;
    } else if (++failures > kMaxAttempts) {
      throw InfeasibleConfig("cannot sample training queries that max-match unambiguously");
    }
  }

  std::vector<Text> seen_words;
  for (const Text& w : out.train_words) {
    if (seen.contains(w)) seen_words.push_back(w);
  }
  if (seen_words.empty()) seen_words = out.train_words;
  for (std::size_t q = 0; q < c.n_test; ++q) {
    const std::size_t len = uniform_between(query_rng, c.query_len.min, c.query_len.max);
    std::vector<Text> words;
    for (std::size_t k = 0; k < len; ++k) {
      const bool oov = n_held > 0 && uniform_unit(query_rng) < c.oov_fraction;
      if (oov || seen_words.empty()) {
        words.push_back(out.held_out_words[uniform_below(query_rng, n_held)]);
      } else {
        words.push_back(seen_words[uniform_below(query_rng, seen_words.size())]);
      }
    }
    out.test.push_back(make_query(std::move(words)));
  }

  // Documents are generated in a fixed order independent of n_docs, so a
  // smaller collection is a prefix of a larger one.
  out.documents.sentences.reserve(c.n_docs);
  for (const Text& w : out.held_out_words) {
    for (std::size_t k = 0; k < c.min_contexts; ++k) {
      out.documents.sentences.push_back(sentence(doc_rng, c, vocab, &w));
    }
  }
  while (out.documents.size() < c.n_docs) {
    out.documents.sentences.push_back(sentence(doc_rng, c, vocab, nullptr));
  }
  return out;
}

}  // namespace qseg
