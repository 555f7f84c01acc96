#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "qseg/context_index.hpp"
#include "qseg/errors.hpp"
#include "qseg/feature_extractor.hpp"

using namespace qseg;

namespace {

const FeatureOptions kOpts{2, 7};

std::vector<Char> chars(Text t) { return {t.begin(), t.end()}; }

}  // namespace

TEST(SubtractAlign, DressContext) {
  const Query q(U"高腰连衣裙白色");
  const Text s = U"流行的连衣裙好看";
  EXPECT_EQ(subtract_align(q, 3, s, 4), (Alignment{2, 2}));
  const ContextFeature f = extract_side_features(q, 3, s, 4, kOpts);
  EXPECT_EQ(f.left.window, chars(U"行的"));
  EXPECT_EQ(f.left.distance, 2u);
}

TEST(SubtractAlign, SentenceEqualsQuery) {
  const Query q(U"abcde");
  for (std::size_t i = 0; i < q.size(); ++i) {
    EXPECT_EQ(subtract_align(q, i, q.chars(), i),
              (Alignment{static_cast<std::uint32_t>(i + 1), static_cast<std::uint32_t>(5 - i)}));
  }
}

TEST(SubtractAlign, OnlyCenterMatches) {
  EXPECT_EQ(subtract_align(Query(U"a"), 0, U"xay", 1), (Alignment{1, 1}));
}

TEST(SubtractAlign, MismatchThrows) {
  EXPECT_THROW(subtract_align(Query(U"ab"), 0, U"xby", 1), AlignmentMismatch);
}

TEST(ExtractSideFeatures, SentenceStartPadsWithBoundary) {
  const ContextFeature f = extract_side_features(Query(U"a"), 0, U"ab", 0, kOpts);
  EXPECT_EQ(f.left.window, (std::vector<Char>{kBoundaryChar, kBoundaryChar}));
  EXPECT_EQ(f.left.distance, 1u);
  EXPECT_EQ(f.right.window, (std::vector<Char>{U'b', kBoundaryChar}));
}

TEST(ExtractSideFeatures, HandWalked) {
  const ContextFeature f = extract_side_features(Query(U"abc"), 1, U"zwabcy", 3, kOpts);
  EXPECT_EQ(f.left.distance, 2u);
  EXPECT_EQ(f.right.distance, 2u);
  EXPECT_EQ(f.left.window, chars(U"zw"));
  EXPECT_EQ(f.right.window, (std::vector<Char>{U'y', kBoundaryChar}));
}

TEST(ExtractSideFeatures, DistanceIsClamped) {
  const Query q(U"abcdefghij");
  const ContextFeature f = extract_side_features(q, 9, q.chars(), 9, FeatureOptions{2, 4});
  EXPECT_EQ(f.left.distance, 4u);
  EXPECT_EQ(f.right.distance, 1u);
}

TEST(ExtractSideFeatures, InvariantsOnRandomContexts) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 2000; ++trial) {
    Text qt, s;
    for (std::size_t n = 1 + rng() % 6; n > 0; --n) qt.push_back(U'a' + static_cast<Char>(rng() % 3));
    for (std::size_t n = 1 + rng() % 10; n > 0; --n) s.push_back(U'a' + static_cast<Char>(rng() % 3));
    const Query q(qt);
    const std::size_t i = rng() % q.size();
    const std::size_t center = rng() % s.size();
    if (s[center] != q[i]) continue;
    const Alignment a = subtract_align(q, i, s, center);
    EXPECT_GE(a.left, 1u);
    EXPECT_GE(a.right, 1u);
    EXPECT_LE(a.left, std::min(i + 1, center + 1));
    EXPECT_LE(a.right, std::min(q.size() - i, s.size() - center));
    const ContextFeature f = extract_side_features(q, i, s, center, FeatureOptions{3, 100});
    ASSERT_EQ(f.left.window.size(), 3u);
    ASSERT_EQ(f.right.window.size(), 3u);
    // Windows sit strictly outside the matched span.
    for (std::size_t k = 0; k < 3; ++k) {
      const auto lpos = static_cast<long>(center) - a.left - 2 + static_cast<long>(k);
      const Char lexp = lpos < 0 ? kBoundaryChar : s[static_cast<std::size_t>(lpos)];
      EXPECT_EQ(f.left.window[k], lexp);
      const std::size_t rpos = center + a.right + k;
      EXPECT_EQ(f.right.window[k], rpos < s.size() ? s[rpos] : kBoundaryChar);
    }
  }
}

TEST(BuildFeatureBags, NoDocumentsGivesEmptyBags) {
  const DocumentSet docs;
  const BigramIndex index(docs);
  const auto bags = build_feature_bags(Query(U"abc"), index, SearchOptions{}, kOpts);
  ASSERT_EQ(bags.size(), 3u);
  for (const auto& b : bags) EXPECT_TRUE(b.empty());
}

TEST(BuildFeatureBags, DressBagContainsTheAlignedContext) {
  const DocumentSet docs{{U"流行的连衣裙好看"}};
  const BigramIndex index(docs);
  const auto bags = build_feature_bags(Query(U"高腰连衣裙白色"), index, SearchOptions{}, kOpts);
  ASSERT_EQ(bags[3].size(), 1u);
  EXPECT_EQ(bags[3][0].left.window, chars(U"行的"));
  EXPECT_EQ(bags[3][0].left.distance, 2u);
  EXPECT_EQ(bags[3][0].right.distance, 2u);
}

TEST(BuildFeatureBags, CapOne) {
  const DocumentSet docs{{U"xabx", U"yaby", U"zabz"}};
  const BigramIndex index(docs);
  for (const auto& b : build_feature_bags(Query(U"ab"), index, SearchOptions{1, 3, false}, kOpts)) {
    EXPECT_LE(b.size(), 1u);
  }
}

TEST(EncodeBag, BoundaryAndUnknown) {
  const Vocabulary vocab(std::vector<Char>{U'a', U'b'});
  FeatureBag bag = {ContextFeature{{{kBoundaryChar, U'a'}, 1}, {{U'b', U'z'}, 3}}};
  const EncodedBag enc = encode_bag(bag, vocab);
  ASSERT_EQ(enc.size(), 1u);
  EXPECT_EQ(enc[0].left.ids, (std::vector<std::int32_t>{Vocabulary::kBoundary, 3}));
  EXPECT_EQ(enc[0].right.ids, (std::vector<std::int32_t>{4, Vocabulary::kUnk}));
  EXPECT_EQ(enc[0].right.distance, 3);
}

TEST(FeatureStream, RoundTrip) {
  std::vector<std::vector<EncodedBag>> queries(2);
  queries[0].resize(2);
  queries[0][1].push_back(EncodedContext{{{3, 4}, 1}, {{5, 2}, 7}});
  queries[1].resize(1);
  std::stringstream buf;
  write_feature_bags(buf, 2, queries);
  std::size_t window = 0;
  EXPECT_EQ(read_feature_bags(buf, &window), queries);
  EXPECT_EQ(window, 2u);
}

TEST(FeatureDump, MarksBoundaries) {
  const DocumentSet docs{{U"ab"}};
  const BigramIndex index(docs);
  const Query q(U"ab");
  const std::string dump =
      dump_feature_bags(q, build_feature_bags(q, index, SearchOptions{}, kOpts));
  EXPECT_NE(dump.find("<s>"), std::string::npos);
}
