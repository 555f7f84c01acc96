#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace qseg {

using Char = char32_t;
using Text = std::u32string;
using TextView = std::u32string_view;

std::string to_utf8(TextView text);
// Throws Error on malformed UTF-8.
Text from_utf8(std::string_view bytes);

// True for characters that may not appear inside a query (whitespace and the
// TAB segment delimiter).
bool is_query_delimiter(Char c);

enum class Tag : std::uint8_t { B = 0, I = 1 };
using LabelSequence = std::vector<Tag>;

std::string format_labels(const LabelSequence& labels);  // e.g. "B I B"

// A non-empty query with no whitespace.
class Query {
 public:
  explicit Query(Text chars);
  static Query from_utf8(std::string_view bytes);

  const Text& chars() const { return chars_; }
  std::size_t size() const { return chars_.size(); }
  Char operator[](std::size_t i) const { return chars_[i]; }
  std::string utf8() const { return to_utf8(chars_); }

  friend bool operator==(const Query&, const Query&) = default;

 private:
  Text chars_;
};

// Ordered, non-empty segments of a query.
struct Segment {
  std::size_t begin;
  std::size_t end;  // exclusive
  friend bool operator==(const Segment&, const Segment&) = default;
  friend auto operator<=>(const Segment&, const Segment&) = default;
};

class Segmentation {
 public:
  Segmentation() = default;
  explicit Segmentation(std::vector<Text> segments);

  const std::vector<Text>& segments() const { return segments_; }
  std::size_t size() const { return segments_.size(); }
  Text joined() const;
  std::vector<Segment> spans() const;

  friend bool operator==(const Segmentation&, const Segmentation&) = default;

 private:
  std::vector<Text> segments_;
};

struct LabeledQuery {
  Query query;
  Segmentation gold;
};

LabelSequence encode_labels(const Segmentation& seg);

// A leading I is read as B; when `repairs` is given it is incremented once
// per repaired sequence.
Segmentation decode_labels(const Query& q, const LabelSequence& labels,
                           std::size_t* repairs = nullptr);

class Dictionary {
 public:
  Dictionary() = default;
  explicit Dictionary(std::span<const Text> entries);

  void insert(Text entry);
  bool contains(TextView s) const { return entries_.contains(Text(s)); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t max_entry_len() const { return max_entry_len_; }
  std::vector<Text> sorted_entries() const;

 private:
  std::unordered_set<Text> entries_;
  std::size_t max_entry_len_ = 0;
};

struct DocumentSet {
  std::vector<Text> sentences;
  std::size_t size() const { return sentences.size(); }
};

// Character vocabulary with reserved ids PAD=0, UNK=1, BOUNDARY=2; the rest
// are assigned in code-point order.
class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;
  static constexpr std::int32_t kBoundary = 2;
  static constexpr std::int32_t kReserved = 3;

  Vocabulary() = default;
  // `chars` need not be sorted or unique.
  explicit Vocabulary(std::vector<Char> chars);

  // Throws EmptyCorpus if neither source has a character.
  static Vocabulary build(std::span<const Query> queries, const DocumentSet& docs);

  std::int32_t id(Char c) const;
  std::size_t size() const { return chars_.size() + kReserved; }
  // Non-reserved characters in id order (id = index + kReserved).
  const std::vector<Char>& chars() const { return chars_; }

  std::vector<std::int32_t> encode(TextView text) const;

 private:
  std::vector<Char> chars_;
  std::unordered_map<Char, std::int32_t> ids_;
};

// File formats. All text is UTF-8; a trailing '\r' on a line is dropped.
std::vector<LabeledQuery> parse_labeled_queries(std::string_view text);
std::vector<Query> parse_queries(std::string_view text);
Dictionary parse_dictionary(std::string_view text);
DocumentSet parse_documents(std::string_view text);

std::string format_labeled_queries(std::span<const LabeledQuery> items);
std::string format_segmentations(std::span<const Segmentation> items);
std::string format_queries(std::span<const Query> items);
std::string format_dictionary(const Dictionary& dict);
std::string format_documents(const DocumentSet& docs);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace qseg
