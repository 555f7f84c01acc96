#include "qseg/feature_extractor.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "qseg/binary_io.hpp"
#include "qseg/errors.hpp"
#include "qseg/random.hpp"

namespace qseg {

Alignment subtract_align(const Query& q, std::size_t i, TextView sentence, std::size_t center) {
  if (i >= q.size() || center >= sentence.size() || sentence[center] != q[i]) {
    throw AlignmentMismatch("sentence character at the center does not match the query");
  }
  std::uint32_t left = 1;
  while (left <= i && left <= center && sentence[center - left] == q[i - left]) ++left;
  std::uint32_t right = 1;
  while (i + right < q.size() && center + right < sentence.size() &&
         sentence[center + right] == q[i + right]) {
    ++right;
  }
  return {left, right};
}

ContextFeature extract_side_features(const Query& q, std::size_t i, TextView sentence,
                                     std::size_t center, const FeatureOptions& opts) {
  const Alignment a = subtract_align(q, i, sentence, center);
  const auto at = [&](std::ptrdiff_t off) {
    return off < 0 || off >= static_cast<std::ptrdiff_t>(sentence.size()) ? kBoundaryChar
                                                                           : sentence[off];
  };
  const auto t = static_cast<std::ptrdiff_t>(opts.window);
  const auto c = static_cast<std::ptrdiff_t>(center);

  ContextFeature f;
  f.left.window.reserve(opts.window);
  f.right.window.reserve(opts.window);
  for (std::ptrdiff_t off = c - a.left - t + 1; off <= c - a.left; ++off) {
    f.left.window.push_back(at(off));
  }
  for (std::ptrdiff_t off = c + a.right; off < c + a.right + t; ++off) {
    f.right.window.push_back(at(off));
  }
  f.left.distance = std::min(a.left, opts.max_distance);
  f.right.distance = std::min(a.right, opts.max_distance);
  return f;
}

std::vector<FeatureBag> build_feature_bags(const Query& q, const BigramIndex& index,
                                           const SearchOptions& search,
                                           const FeatureOptions& opts) {
  std::vector<FeatureBag> bags(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    SearchOptions pos = search;
    pos.seed = mix_seed(search.seed, i);
    for (const Context& ctx : find_contexts(index, q, i, pos).items) {
      bags[i].push_back(
          extract_side_features(q, i, index.docs().sentences[ctx.sentence], ctx.center, opts));
    }
  }
  return bags;
}

namespace {

EncodedSide encode_side(const SideFeature& s, const Vocabulary& vocab) {
  EncodedSide out;
  out.ids.reserve(s.window.size());
  for (Char c : s.window) {
    out.ids.push_back(c == kBoundaryChar ? Vocabulary::kBoundary : vocab.id(c));
  }
  out.distance = static_cast<std::int32_t>(s.distance);
  return out;
}

}  // namespace

EncodedBag encode_bag(const FeatureBag& bag, const Vocabulary& vocab) {
  EncodedBag out;
  out.reserve(bag.size());
  for (const ContextFeature& f : bag) {
    out.push_back({encode_side(f.left, vocab), encode_side(f.right, vocab)});
  }
  return out;
}

void write_feature_bags(std::ostream& out, std::size_t window,
                        std::span<const std::vector<EncodedBag>> queries) {
  binary::write_u32(out, static_cast<std::uint32_t>(window));
  binary::write_u32(out, static_cast<std::uint32_t>(queries.size()));
  for (const auto& bags : queries) {
    binary::write_u32(out, static_cast<std::uint32_t>(bags.size()));
    for (const EncodedBag& bag : bags) {
      binary::write_u32(out, static_cast<std::uint32_t>(bag.size()));
      for (const EncodedContext& ctx : bag) {
        if (ctx.left.ids.size() != window || ctx.right.ids.size() != window) {
          throw ShapeMismatch("feature window size differs from the stream header");
        }
        for (std::int32_t id : ctx.left.ids) binary::write_i32(out, id);
        binary::write_i32(out, ctx.left.distance);
        for (std::int32_t id : ctx.right.ids) binary::write_i32(out, id);
        binary::write_i32(out, ctx.right.distance);
      }
    }
  }
}

std::vector<std::vector<EncodedBag>> read_feature_bags(std::istream& in, std::size_t* window) {
  const std::uint32_t t = binary::read_u32(in);
  if (window) *window = t;
  const std::uint32_t n_queries = binary::read_u32(in);
  std::vector<std::vector<EncodedBag>> out;
  out.reserve(n_queries);
  for (std::uint32_t qi = 0; qi < n_queries; ++qi) {
    auto& bags = out.emplace_back(binary::read_u32(in));
    for (EncodedBag& bag : bags) {
      bag.resize(binary::read_u32(in));
      for (EncodedContext& ctx : bag) {
        for (EncodedSide* side : {&ctx.left, &ctx.right}) {
          side->ids.resize(t);
          for (std::int32_t& id : side->ids) id = binary::read_i32(in);
          side->distance = binary::read_i32(in);
        }
      }
    }
  }
  return out;
}

std::string dump_feature_bags(const Query& q, std::span<const FeatureBag> bags) {
  const auto window_text = [](const SideFeature& s) {
    std::string out;
    for (Char c : s.window) out += c == kBoundaryChar ? std::string("<s>") : to_utf8(TextView(&c, 1));
    return out;
  };
  std::string out = "query " + q.utf8() + "\n";
  for (std::size_t i = 0; i < bags.size(); ++i) {
    out += "  [" + std::to_string(i) + "] " + to_utf8(TextView(&q.chars()[i], 1)) + " contexts=" +
           std::to_string(bags[i].size()) + "\n";
    for (const ContextFeature& f : bags[i]) {
      out += "      L=(" + window_text(f.left) + "," + std::to_string(f.left.distance) + ") R=(" +
             window_text(f.right) + "," + std::to_string(f.right.distance) + ")\n";
    }
  }
  return out;
}

}  // namespace qseg
