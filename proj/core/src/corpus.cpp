#include "qseg/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <boost/locale/encoding_utf.hpp>

#include "qseg/errors.hpp"

namespace qseg {

std::string to_utf8(TextView text) {
  return boost::locale::conv::utf_to_utf<char>(text.data(), text.data() + text.size(),
                                               boost::locale::conv::stop);
}

Text from_utf8(std::string_view bytes) {
  try {
    return boost::locale::conv::utf_to_utf<Char>(bytes.data(), bytes.data() + bytes.size(),
                                                 boost::locale::conv::stop);
  } catch (const boost::locale::conv::conversion_error&) {
    throw Error("malformed UTF-8 input");
  }
}

bool is_query_delimiter(Char c) {
  switch (c) {
    case U' ': case U'\t': case U'\n': case U'\r': case U'\v': case U'\f':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

std::string format_labels(const LabelSequence& labels) {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) out += ' ';
    out += labels[i] == Tag::B ? 'B' : 'I';
  }
  return out;
}

Query::Query(Text chars) : chars_(std::move(chars)) {
  if (chars_.empty()) throw InvalidQuery("query is empty");
  for (Char c : chars_) {
    if (is_query_delimiter(c)) throw InvalidQuery("query contains whitespace: " + to_utf8(chars_));
  }
}

Query Query::from_utf8(std::string_view bytes) { return Query(qseg::from_utf8(bytes)); }

Segmentation::Segmentation(std::vector<Text> segments) : segments_(std::move(segments)) {
  for (const Text& s : segments_) {
    if (s.empty()) throw InvalidQuery("segmentation has an empty segment");
  }
}

Text Segmentation::joined() const {
  Text out;
  for (const Text& s : segments_) out += s;
  return out;
}

std::vector<Segment> Segmentation::spans() const {
  std::vector<Segment> out;
  out.reserve(segments_.size());
  std::size_t pos = 0;
  for (const Text& s : segments_) {
    out.push_back({pos, pos + s.size()});
    pos += s.size();
  }
  return out;
}

LabelSequence encode_labels(const Segmentation& seg) {
  LabelSequence out;
  for (const Text& s : seg.segments()) {
    out.push_back(Tag::B);
    out.insert(out.end(), s.size() - 1, Tag::I);
  }
  return out;
}

Segmentation decode_labels(const Query& q, const LabelSequence& labels, std::size_t* repairs) {
  if (labels.size() != q.size()) {
    throw LengthMismatch("label sequence has " + std::to_string(labels.size()) +
                         " tags for a query of length " + std::to_string(q.size()));
  }
  if (labels.front() == Tag::I && repairs) ++*repairs;
  std::vector<Text> segments;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (i == 0 || labels[i] == Tag::B) segments.emplace_back();
    segments.back() += q[i];
  }
  return Segmentation(std::move(segments));
}

Dictionary::Dictionary(std::span<const Text> entries) {
  for (const Text& e : entries) insert(e);
}

void Dictionary::insert(Text entry) {
  if (entry.empty()) return;
  max_entry_len_ = std::max(max_entry_len_, entry.size());
  entries_.insert(std::move(entry));
}

std::vector<Text> Dictionary::sorted_entries() const {
  std::vector<Text> out(entries_.begin(), entries_.end());
  std::sort(out.begin(), out.end());
  return out;
}

Vocabulary::Vocabulary(std::vector<Char> chars) : chars_(std::move(chars)) {
  std::sort(chars_.begin(), chars_.end());
  chars_.erase(std::unique(chars_.begin(), chars_.end()), chars_.end());
  ids_.reserve(chars_.size());
  for (std::size_t i = 0; i < chars_.size(); ++i) {
    ids_.emplace(chars_[i], static_cast<std::int32_t>(i) + kReserved);
  }
}

Vocabulary Vocabulary::build(std::span<const Query> queries, const DocumentSet& docs) {
  std::unordered_set<Char> seen;
  for (const Query& q : queries) seen.insert(q.chars().begin(), q.chars().end());
  for (const Text& s : docs.sentences) seen.insert(s.begin(), s.end());
  if (seen.empty()) throw EmptyCorpus("cannot build a vocabulary from an empty corpus");
  return Vocabulary(std::vector<Char>(seen.begin(), seen.end()));
}

std::int32_t Vocabulary::id(Char c) const {
  auto it = ids_.find(c);
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<std::int32_t> Vocabulary::encode(TextView text) const {
  std::vector<std::int32_t> out;
  out.reserve(text.size());
  for (Char c : text) out.push_back(id(c));
  return out;
}

namespace {

// Calls fn(line_number, line) for each line; the final newline does not open
// an extra empty line.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    fn(line_no, line);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
}

Text decode_line(std::size_t line_no, std::string_view line) {
  try {
    return from_utf8(line);
  } catch (const Error&) {
    throw ParseError(line_no, "malformed UTF-8");
  }
}

}  // namespace

std::vector<LabeledQuery> parse_labeled_queries(std::string_view text) {
  std::vector<LabeledQuery> out;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (line.empty()) throw ParseError(line_no, "blank line");
    std::vector<Text> segments;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      Text seg = decode_line(line_no, line.substr(start, tab - start));
      if (seg.empty()) throw ParseError(line_no, "empty segment");
      for (Char c : seg) {
        if (is_query_delimiter(c)) throw ParseError(line_no, "whitespace inside a segment");
      }
      segments.push_back(std::move(seg));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    Segmentation gold(std::move(segments));
    out.push_back({Query(gold.joined()), std::move(gold)});
  });
  return out;
}

std::vector<Query> parse_queries(std::string_view text) {
  std::vector<Query> out;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (line.empty()) throw ParseError(line_no, "blank line");
    Text chars = decode_line(line_no, line);
    for (Char c : chars) {
      if (is_query_delimiter(c)) throw ParseError(line_no, "whitespace inside a query");
    }
    out.emplace_back(std::move(chars));
  });
  return out;
}

Dictionary parse_dictionary(std::string_view text) {
  Dictionary dict;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (!line.empty()) dict.insert(decode_line(line_no, line));
  });
  return dict;
}

DocumentSet parse_documents(std::string_view text) {
  DocumentSet docs;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    docs.sentences.push_back(decode_line(line_no, line));
  });
  return docs;
}

std::string format_segmentations(std::span<const Segmentation> items) {
  std::string out;
  for (const Segmentation& seg : items) {
    for (std::size_t i = 0; i < seg.size(); ++i) {
      if (i) out += '\t';
      out += to_utf8(seg.segments()[i]);
    }
    out += '\n';
  }
  return out;
}

std::string format_labeled_queries(std::span<const LabeledQuery> items) {
  std::vector<Segmentation> segs;
  segs.reserve(items.size());
  for (const LabeledQuery& lq : items) segs.push_back(lq.gold);
  return format_segmentations(segs);
}

std::string format_queries(std::span<const Query> items) {
  std::string out;
  for (const Query& q : items) {
    out += q.utf8();
    out += '\n';
  }
  return out;
}

std::string format_dictionary(const Dictionary& dict) {
  std::string out;
  for (const Text& e : dict.sorted_entries()) {
    out += to_utf8(e);
    out += '\n';
  }
  return out;
}

std::string format_documents(const DocumentSet& docs) {
  std::string out;
  for (const Text& s : docs.sentences) {
    out += to_utf8(s);
    out += '\n';
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error("write failed: " + path);
}

}  // namespace qseg
