#include "qseg/seqlab_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "qseg/errors.hpp"
#include "qseg/random.hpp"

namespace qseg {

using ad::Tape;
using ad::Tensor;
using ad::Var;

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kQ: return "q";
    case Variant::kC: return "c";
    case Variant::kQC: return "qc";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "q" || name == "Q") return Variant::kQ;
  if (name == "c" || name == "C") return Variant::kC;
  if (name == "qc" || name == "QC" || name == "q+c" || name == "Q+C") return Variant::kQC;
  throw Error("unknown variant '" + std::string(name) + "' (expected q, c or qc)");
}

std::size_t ModelConfig::z_dim() const {
  switch (variant) {
    case Variant::kQ: return query_dim();
    case Variant::kC: return bag_dim();
    case Variant::kQC: return query_dim() + bag_dim();
  }
  return 0;
}

namespace {

// Box-Muller on the raw engine, so weights do not depend on the standard
// library's normal_distribution.
double standard_normal(Rng& rng) {
  const double u1 = 1.0 - uniform_unit(rng);
  const double u2 = uniform_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Tensor normal_matrix(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
  std::vector<double> v(rows * cols);
  for (double& x : v) x = scale * standard_normal(rng);
  return Tensor::matrix(rows, cols, std::move(v));
}

LstmParams init_lstm(std::size_t input, std::size_t hidden, Rng& rng) {
  LstmParams p;
  p.w_i = normal_matrix(hidden, input + hidden, kLstmWeightScale, rng);
  p.w_f = normal_matrix(hidden, input + hidden, kLstmWeightScale, rng);
  p.w_o = normal_matrix(hidden, input + hidden, kLstmWeightScale, rng);
  p.w_c = normal_matrix(hidden, input + hidden, kLstmWeightScale, rng);
  p.b_i = Tensor::zeros(hidden);
  p.b_f = Tensor::zeros(hidden);
  p.b_f.fill(1.0);
  p.b_o = Tensor::zeros(hidden);
  p.b_c = Tensor::zeros(hidden);
  return p;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& c, std::uint64_t seed) {
  if (c.vocab_size == 0) throw ShapeMismatch("model needs a non-empty vocabulary");
  Rng rng(seed);
  ModelParams p;
  p.char_emb = normal_matrix(c.vocab_size, c.char_dim, kCharEmbeddingScale, rng);
  p.dist_emb = normal_matrix(c.max_distance, c.distance_dim, 1.0, rng);
  p.fwd = init_lstm(c.char_dim, c.hidden_dim, rng);
  p.bwd = init_lstm(c.char_dim, c.hidden_dim, rng);
  p.proj = normal_matrix(c.feature_dim, c.char_dim + c.distance_dim, kContextProjectionScale, rng);
  p.attention = normal_matrix(c.bag_dim(), c.query_dim(), 1.0, rng);
  p.crf = normal_matrix(kPairCount, c.z_dim(), 1.0, rng);
  return p;
}

ModelParams ModelParams::zeros_like(const ModelParams& src) {
  ModelParams p = src;
  p.for_each([](std::string_view, Tensor& t) { t.fill(0.0); });
  return p;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&](std::string_view, const Tensor& t) { n += t.size(); });
  return n;
}

bool ModelParams::all_finite() const {
  bool ok = true;
  for_each([&](std::string_view, const Tensor& t) {
    for (double x : t.values()) ok = ok && std::isfinite(x);
  });
  return ok;
}

namespace {

ad::LstmVars bind_lstm(Tape& tape, const LstmParams& p, LstmParams* g) {
  return {tape.param(p.w_i, g ? &g->w_i : nullptr), tape.param(p.w_f, g ? &g->w_f : nullptr),
          tape.param(p.w_o, g ? &g->w_o : nullptr), tape.param(p.w_c, g ? &g->w_c : nullptr),
          tape.param(p.b_i, g ? &g->b_i : nullptr), tape.param(p.b_f, g ? &g->b_f : nullptr),
          tape.param(p.b_o, g ? &g->b_o : nullptr), tape.param(p.b_c, g ? &g->b_c : nullptr)};
}

}  // namespace

BoundParams bind(Tape& tape, const ModelParams& p, ModelParams* g) {
  BoundParams b;
  b.char_emb = tape.param(p.char_emb, g ? &g->char_emb : nullptr);
  b.dist_emb = tape.param(p.dist_emb, g ? &g->dist_emb : nullptr);
  b.fwd = bind_lstm(tape, p.fwd, g ? &g->fwd : nullptr);
  b.bwd = bind_lstm(tape, p.bwd, g ? &g->bwd : nullptr);
  b.proj = tape.param(p.proj, g ? &g->proj : nullptr);
  b.attention = tape.param(p.attention, g ? &g->attention : nullptr);
  b.crf = tape.param(p.crf, g ? &g->crf : nullptr);
  return b;
}

std::vector<Var> encode_query(Tape& tape, const BoundParams& p, std::span<const std::int32_t> ids,
                              std::size_t hidden_dim) {
  const std::size_t n = ids.size();
  std::vector<Var> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = tape.lookup_row(p.char_emb, static_cast<std::size_t>(ids[i]));
  }
  const Var zero = tape.constant(Tensor::zeros(hidden_dim));

  std::vector<Var> fwd(n), bwd(n);
  ad::LstmState state{zero, zero};
  for (std::size_t i = 0; i < n; ++i) {
    state = ad::lstm_cell(tape, p.fwd, x[i], state);
    fwd[i] = state.h;
  }
  state = {zero, zero};
  for (std::size_t i = n; i-- > 0;) {
    state = ad::lstm_cell(tape, p.bwd, x[i], state);
    bwd[i] = state.h;
  }
  std::vector<Var> h(n);
  for (std::size_t i = 0; i < n; ++i) h[i] = tape.concat({fwd[i], bwd[i]});
  return h;
}

Var encode_side(Tape& tape, const BoundParams& p, const EncodedSide& side) {
  std::vector<Var> rows;
  rows.reserve(side.ids.size());
  for (std::int32_t id : side.ids) rows.push_back(tape.lookup_row(p.char_emb, static_cast<std::size_t>(id)));
  const Var chars = tape.mean_rows(tape.stack_rows(rows));
  const Var dist = tape.lookup_row(p.dist_emb, static_cast<std::size_t>(side.distance - 1));
  return tape.tanh(tape.matvec(p.proj, tape.concat({chars, dist})));
}

BagEncoding encode_bag(Tape& tape, const BoundParams& p, const EncodedBag& bag, Var h,
                       std::size_t feature_dim) {
  if (bag.empty()) return {tape.constant(Tensor::zeros(2 * feature_dim)), Var{}};
  std::vector<Var> f;
  std::vector<Var> w;
  f.reserve(bag.size());
  w.reserve(bag.size());
  for (const EncodedContext& ctx : bag) {
    const Var fj = tape.concat({encode_side(tape, p, ctx.left), encode_side(tape, p, ctx.right)});
    f.push_back(fj);
    w.push_back(tape.dot(tape.tanh(tape.vecmat(fj, p.attention)), h));
  }
  const Var alphas = tape.softmax(tape.concat(w));
  return {tape.vecmat(alphas, tape.stack_rows(f)), alphas};
}

Var compose_z(Tape& tape, Variant variant, Var h, Var b) {
  switch (variant) {
    case Variant::kQ: return h;
    case Variant::kC: return b;
    case Variant::kQC: return tape.concat({h, b});
  }
  return h;
}

Var crf_log_partition(Tape& tape, Var crf, std::span<const Var> z) {
  if (z.empty()) throw LengthMismatch("CRF needs at least one position");
  constexpr std::size_t B = 0, I = 1;
  Var alpha = tape.gather(tape.matvec(crf, z[0]),
                          {pair_row(kStartLabel, B), pair_row(kStartLabel, I)});
  for (std::size_t i = 1; i < z.size(); ++i) {
    const Var s = tape.matvec(crf, z[i]);
    const Var to_b = tape.logsumexp(tape.add(alpha, tape.gather(s, {pair_row(B, B), pair_row(I, B)})));
    const Var to_i = tape.logsumexp(tape.add(alpha, tape.gather(s, {pair_row(B, I), pair_row(I, I)})));
    alpha = tape.concat({to_b, to_i});
  }
  return tape.logsumexp(alpha);
}

Var crf_sequence_score(Tape& tape, Var crf, std::span<const Var> z, const LabelSequence& labels) {
  if (labels.size() != z.size()) {
    throw LengthMismatch("label sequence length " + std::to_string(labels.size()) +
                         " != " + std::to_string(z.size()) + " positions");
  }
  std::vector<Var> picks;
  picks.reserve(z.size());
  std::size_t prev = kStartLabel;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const auto cur = static_cast<std::size_t>(labels[i]);
    picks.push_back(tape.gather(tape.matvec(crf, z[i]), {pair_row(prev, cur)}));
    prev = cur;
  }
  return tape.sum(tape.concat(picks));
}

Var crf_log_likelihood(Tape& tape, Var crf, std::span<const Var> z, const LabelSequence& labels) {
  const Var score = crf_sequence_score(tape, crf, z, labels);
  return tape.sub(score, crf_log_partition(tape, crf, z));
}

namespace {

// Six pair scores W[pair] . z for one position.
std::array<double, kPairCount> pair_scores(const Tensor& crf, const Tensor& z) {
  if (crf.rank() != 2 || crf.rows() != kPairCount || crf.cols() != z.size()) {
    throw ShapeMismatch("CRF weights " + crf.shape_string() + " do not fit z " + z.shape_string());
  }
  std::array<double, kPairCount> s{};
  for (std::size_t r = 0; r < kPairCount; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) acc += crf.at(r, c) * z[c];
    s[r] = acc;
  }
  return s;
}

}  // namespace

double sequence_score(const Tensor& crf, std::span<const Tensor> z, const LabelSequence& labels) {
  if (labels.size() != z.size()) throw LengthMismatch("label sequence length mismatch");
  double total = 0.0;
  std::size_t prev = kStartLabel;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const auto cur = static_cast<std::size_t>(labels[i]);
    total += pair_scores(crf, z[i])[pair_row(prev, cur)];
    prev = cur;
  }
  return total;
}

LabelSequence viterbi_decode(const Tensor& crf, std::span<const Tensor> z, bool constrain_first_b) {
  const std::size_t n = z.size();
  if (n == 0) return {};
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<std::array<std::uint8_t, 2>> back(n);
  auto s = pair_scores(crf, z[0]);
  std::array<double, 2> delta = {s[pair_row(kStartLabel, 0)], s[pair_row(kStartLabel, 1)]};
  if (constrain_first_b) delta[1] = kNegInf;
  for (std::size_t i = 1; i < n; ++i) {
    s = pair_scores(crf, z[i]);
    std::array<double, 2> next{};
    for (std::size_t cur = 0; cur < 2; ++cur) {
      const double from_b = delta[0] + s[pair_row(0, cur)];
      const double from_i = delta[1] + s[pair_row(1, cur)];
      // >= keeps B on ties.
      if (from_b >= from_i) {
        next[cur] = from_b;
        back[i][cur] = 0;
      } else {
        next[cur] = from_i;
        back[i][cur] = 1;
      }
    }
    delta = next;
  }
  LabelSequence out(n);
  std::size_t cur = delta[0] >= delta[1] ? 0 : 1;
  for (std::size_t i = n; i-- > 0;) {
    out[i] = static_cast<Tag>(cur);
    if (i > 0) cur = back[i][cur];
  }
  return out;
}

std::vector<Var> forward_z(Tape& tape, const BoundParams& p, const ModelConfig& config,
                           const Example& ex) {
  const std::vector<Var> h = encode_query(tape, p, ex.ids, config.hidden_dim);
  if (config.variant == Variant::kQ) return h;
  if (ex.bags.size() != ex.ids.size()) {
    throw LengthMismatch("expected one feature bag per query character");
  }
  std::vector<Var> z(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const BagEncoding bag = encode_bag(tape, p, ex.bags[i], h[i], config.feature_dim);
    z[i] = compose_z(tape, config.variant, h[i], bag.b);
  }
  return z;
}

Var example_loss(Tape& tape, const BoundParams& p, const ModelConfig& config, const Example& ex) {
  const std::vector<Var> z = forward_z(tape, p, config, ex);
  return tape.scale(crf_log_likelihood(tape, p.crf, z, ex.labels), -1.0);
}

LabelSequence predict_labels(const ModelParams& params, const ModelConfig& config,
                             const Example& ex) {
  Tape tape;
  const BoundParams p = bind(tape, params);
  const std::vector<Var> z = forward_z(tape, p, config, ex);
  std::vector<Tensor> zs;
  zs.reserve(z.size());
  for (Var v : z) zs.push_back(tape.value(v));
  return viterbi_decode(params.crf, zs, true);
}

Segmentation predict(const Query& q, std::span<const EncodedBag> bags, const ModelParams& params,
                     const ModelConfig& config, const Vocabulary& vocab) {
  Example ex;
  ex.ids = vocab.encode(q.chars());
  ex.bags.assign(bags.begin(), bags.end());
  return decode_labels(q, predict_labels(params, config, ex));
}

}  // namespace qseg
