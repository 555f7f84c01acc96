#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "qseg/context_index.hpp"
#include "qseg/corpus.hpp"

namespace qseg {

// Placeholder for window offsets that fall outside the sentence. Not a valid
// Unicode scalar, so it can never collide with real text.
inline constexpr Char kBoundaryChar = 0x110000;

struct FeatureOptions {
  std::size_t window = 2;        // t
  std::uint32_t max_distance = 7;  // K_max
};

// Number of characters matched between sentence and query on each side of
// the aligned center, the center itself included.
struct Alignment {
  std::uint32_t left;
  std::uint32_t right;
  friend bool operator==(const Alignment&, const Alignment&) = default;
};

struct SideFeature {
  std::vector<Char> window;  // t characters, kBoundaryChar outside the sentence
  std::uint32_t distance;    // clamped to [1, max_distance]
  friend bool operator==(const SideFeature&, const SideFeature&) = default;
};

struct ContextFeature {
  SideFeature left;
  SideFeature right;
  friend bool operator==(const ContextFeature&, const ContextFeature&) = default;
};

using FeatureBag = std::vector<ContextFeature>;

// Walks outward from the aligned center while sentence and query agree.
// Throws AlignmentMismatch if sentence[center] != q[i].
Alignment subtract_align(const Query& q, std::size_t i, TextView sentence, std::size_t center);

// The t characters just outside the matched span on each side, in reading
// order, plus the clamped match distances.
ContextFeature extract_side_features(const Query& q, std::size_t i, TextView sentence,
                                     std::size_t center, const FeatureOptions& opts);

// Per-position seeds are derived from search.seed so each position samples
// independently.
std::vector<FeatureBag> build_feature_bags(const Query& q, const BigramIndex& index,
                                           const SearchOptions& search,
                                           const FeatureOptions& opts);

// Feature bags with characters replaced by vocabulary ids; what the model
// consumes.
struct EncodedSide {
  std::vector<std::int32_t> ids;
  std::int32_t distance;
  friend bool operator==(const EncodedSide&, const EncodedSide&) = default;
};

struct EncodedContext {
  EncodedSide left;
  EncodedSide right;
  friend bool operator==(const EncodedContext&, const EncodedContext&) = default;
};

using EncodedBag = std::vector<EncodedContext>;

EncodedBag encode_bag(const FeatureBag& bag, const Vocabulary& vocab);

// Binary stream: u32 window size, u32 query count; per query u32 length, per
// position u32 item count, per item t left ids, k_l, t right ids, k_r, all as
// 32-bit little-endian integers.
void write_feature_bags(std::ostream& out, std::size_t window,
                        std::span<const std::vector<EncodedBag>> queries);
std::vector<std::vector<EncodedBag>> read_feature_bags(std::istream& in, std::size_t* window);

// Human-readable listing for one query.
std::string dump_feature_bags(const Query& q, std::span<const FeatureBag> bags);

}  // namespace qseg
