#include "qseg/model_io.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "qseg/binary_io.hpp"
#include "qseg/errors.hpp"

namespace qseg {

namespace {

constexpr std::string_view kModelMagic = "SQMD1";
constexpr double kFormatRevision = 1.0;

void write_section(std::ostream& out, std::string_view name, const ad::Tensor& t) {
  binary::write_bytes(out, name);
  const auto shape = t.shape();
  binary::write_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (std::size_t d : shape) binary::write_u32(out, static_cast<std::uint32_t>(d));
  for (double v : t.values()) binary::write_f64(out, v);
}

std::size_t as_size(double v) {
  if (!(v >= 0) || v != static_cast<double>(static_cast<std::size_t>(v))) {
    throw FormatError("hyperparameter is not a non-negative integer");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

void save_model(std::ostream& out, const SavedModel& m) {
  const ModelConfig& c = m.config;
  std::vector<double> hp = {
      kFormatRevision,
      static_cast<double>(c.vocab_size),
      static_cast<double>(c.char_dim),
      static_cast<double>(c.hidden_dim),
      static_cast<double>(c.distance_dim),
      static_cast<double>(c.feature_dim),
      static_cast<double>(c.window),
      static_cast<double>(c.max_distance),
      static_cast<double>(static_cast<int>(c.variant)),
      static_cast<double>(m.search.cap),
      static_cast<double>(m.search.seed & 0xffffffffu),
      static_cast<double>(m.search.seed >> 32),
      m.search.exclude_self ? 1.0 : 0.0,
  };
  std::vector<double> vocab(m.vocab.chars().begin(), m.vocab.chars().end());
  if (vocab.empty()) vocab.push_back(-1.0);  // rank-1 sections cannot be empty

  std::size_t sections = 2;
  m.params.for_each([&](std::string_view, const ad::Tensor&) { ++sections; });

  binary::write_magic(out, kModelMagic);
  binary::write_u32(out, static_cast<std::uint32_t>(sections));
  write_section(out, "hparams", ad::Tensor::vector(std::move(hp)));
  write_section(out, "vocab", ad::Tensor::vector(std::move(vocab)));
  m.params.for_each([&](std::string_view name, const ad::Tensor& t) { write_section(out, name, t); });
  if (!out) throw Error("failed to write model");
}

SavedModel load_model(std::istream& in) {
  binary::expect_magic(in, kModelMagic);
  const std::uint32_t count = binary::read_u32(in);
  std::map<std::string, ad::Tensor> sections;
  for (std::uint32_t s = 0; s < count; ++s) {
    std::string name = binary::read_bytes(in, 256);
    const std::uint32_t rank = binary::read_u32(in);
    if (rank > 2) throw FormatError("section " + name + " has rank > 2");
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (std::size_t& d : shape) {
      d = binary::read_u32(in);
      if (d == 0 || d > (1u << 26)) throw FormatError("section " + name + " has a bad dimension");
      n *= d;
    }
    if (n > (1u << 26)) throw FormatError("section " + name + " is too large");
    std::vector<double> values(n);
    for (double& v : values) v = binary::read_f64(in);
    sections[name] = ad::Tensor::from_shape(shape, std::move(values));
  }
  const auto take = [&](const std::string& name) -> ad::Tensor& {
    auto it = sections.find(name);
    if (it == sections.end()) throw FormatError("model is missing section " + name);
    return it->second;
  };

  const ad::Tensor& hp = take("hparams");
  if (hp.size() != 13 || hp[0] != kFormatRevision) throw FormatError("unsupported hparams section");
  SavedModel m;
  ModelConfig& c = m.config;
  c.vocab_size = as_size(hp[1]);
  c.char_dim = as_size(hp[2]);
  c.hidden_dim = as_size(hp[3]);
  c.distance_dim = as_size(hp[4]);
  c.feature_dim = as_size(hp[5]);
  c.window = as_size(hp[6]);
  c.max_distance = as_size(hp[7]);
  const std::size_t variant = as_size(hp[8]);
  if (variant > 2) throw FormatError("unknown variant code");
  c.variant = static_cast<Variant>(variant);
  m.search.cap = as_size(hp[9]);
  m.search.seed = static_cast<std::uint64_t>(as_size(hp[10])) |
                  (static_cast<std::uint64_t>(as_size(hp[11])) << 32);
  m.search.exclude_self = hp[12] != 0.0;

  std::vector<Char> chars;
  for (double v : take("vocab").values()) {
    if (v >= 0) chars.push_back(static_cast<Char>(as_size(v)));
  }
  m.vocab = Vocabulary(std::move(chars));
  if (m.vocab.size() != c.vocab_size) throw FormatError("vocabulary size does not match hparams");

  const ModelParams expected = ModelParams::zeros_like(ModelParams::init(c, 0));
  m.params = expected;
  m.params.for_each([&](std::string_view name, ad::Tensor& t) {
    ad::Tensor& stored = take(std::string(name));
    if (!stored.same_shape(t)) {
      throw FormatError("section " + std::string(name) + " has shape " + stored.shape_string() +
                        ", expected " + t.shape_string());
    }
    t = std::move(stored);
  });
  return m;
}

void save_model_file(const std::string& path, const SavedModel& model) {
  std::ostringstream buf(std::ios::binary);
  save_model(buf, model);
  write_file(path, buf.str());
}

SavedModel load_model_file(const std::string& path) {
  std::istringstream in(read_file(path), std::ios::binary);
  return load_model(in);
}

}  // namespace qseg
