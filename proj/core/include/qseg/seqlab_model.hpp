#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qseg/autodiff.hpp"
#include "qseg/corpus.hpp"
#include "qseg/feature_extractor.hpp"

namespace qseg {

// What the CRF sees at each position: the query encoding (Q), the context
// bag encoding (C), or both concatenated (QC).
enum class Variant : std::uint8_t { kQ = 0, kC = 1, kQC = 2 };

std::string_view variant_name(Variant v);  // "q", "c", "qc"
// Throws Error on anything else.
Variant parse_variant(std::string_view name);

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t char_dim = 10;
  std::size_t hidden_dim = 10;  // per direction
  std::size_t distance_dim = 5;
  std::size_t feature_dim = 10;  // size of one encoded side
  std::size_t window = 2;
  std::size_t max_distance = 7;
  Variant variant = Variant::kQC;

  std::size_t query_dim() const { return 2 * hidden_dim; }
  std::size_t bag_dim() const { return 2 * feature_dim; }
  std::size_t z_dim() const;
};

// CRF pair-weight rows: row = prev * 2 + cur with prev in {B, I, START} and
// cur in {B, I}.
inline constexpr std::size_t kStartLabel = 2;
inline constexpr std::size_t kPairCount = 6;
constexpr std::size_t pair_row(std::size_t prev, std::size_t cur) { return prev * 2 + cur; }

inline constexpr double kCharEmbeddingScale = 0.1;
inline constexpr double kLstmWeightScale = 0.1;
inline constexpr double kContextProjectionScale = 0.1;

struct LstmParams {
  ad::Tensor w_i, w_f, w_o, w_c;
  ad::Tensor b_i, b_f, b_o, b_c;
};

struct ModelParams {
  ad::Tensor char_emb;   // vocab x char_dim
  ad::Tensor dist_emb;   // max_distance x distance_dim
  LstmParams fwd;
  LstmParams bwd;
  ad::Tensor proj;       // feature_dim x (char_dim + distance_dim)
  ad::Tensor attention;  // bag_dim x query_dim
  ad::Tensor crf;        // kPairCount x z_dim

  // Standard normal draws. Character embeddings, LSTM matrices and the context
  // projection are scaled by 0.1; LSTM biases are zero except the forget gate at 1.0.
  static ModelParams init(const ModelConfig& config, std::uint64_t seed);
  static ModelParams zeros_like(const ModelParams& p);

  template <typename F>
  void for_each(F&& f) {
    f("char_emb", char_emb);
    f("dist_emb", dist_emb);
    visit_lstm("fwd", fwd, f);
    visit_lstm("bwd", bwd, f);
    f("proj", proj);
    f("attention", attention);
    f("crf", crf);
  }
  template <typename F>
  void for_each(F&& f) const {
    const_cast<ModelParams*>(this)->for_each(
        [&](std::string_view name, ad::Tensor& t) { f(name, static_cast<const ad::Tensor&>(t)); });
  }

  std::size_t parameter_count() const;
  bool all_finite() const;

 private:
  template <typename F>
  static void visit_lstm(std::string_view dir, LstmParams& p, F& f) {
    const std::string d(dir);
    f(d + ".w_i", p.w_i);
    f(d + ".w_f", p.w_f);
    f(d + ".w_o", p.w_o);
    f(d + ".w_c", p.w_c);
    f(d + ".b_i", p.b_i);
    f(d + ".b_f", p.b_f);
    f(d + ".b_o", p.b_o);
    f(d + ".b_c", p.b_c);
  }
};

// Parameters registered as leaves on a tape.
struct BoundParams {
  ad::Var char_emb, dist_emb;
  ad::LstmVars fwd, bwd;
  ad::Var proj, attention, crf;
};

// With `grads` set, backward() accumulates into it; otherwise the
// parameters are constants.
BoundParams bind(ad::Tape& tape, const ModelParams& params, ModelParams* grads = nullptr);

// h_i = [forward h_i; backward h_i], both directions from a zero state.
std::vector<ad::Var> encode_query(ad::Tape& tape, const BoundParams& p,
                                  std::span<const std::int32_t> ids, std::size_t hidden_dim);

// g = tanh(W [mean window embedding; distance embedding]).
ad::Var encode_side(ad::Tape& tape, const BoundParams& p, const EncodedSide& side);

struct BagEncoding {
  ad::Var b;
  ad::Var alphas;  // invalid for an empty bag
};

// Attention over f_j = [g_left; g_right] scored by tanh(f_j^T U) . h.
// An empty bag encodes to the zero vector.
BagEncoding encode_bag(ad::Tape& tape, const BoundParams& p, const EncodedBag& bag, ad::Var h,
                       std::size_t feature_dim);

ad::Var compose_z(ad::Tape& tape, Variant variant, ad::Var h, ad::Var b);

// log of the sum over all label sequences of exp(sum_i W[y_{i-1}, y_i] . z_i),
// y_0 = START, by the forward recursion in log space.
ad::Var crf_log_partition(ad::Tape& tape, ad::Var crf, std::span<const ad::Var> z);
ad::Var crf_sequence_score(ad::Tape& tape, ad::Var crf, std::span<const ad::Var> z,
                           const LabelSequence& labels);
// Throws LengthMismatch when |labels| != |z|.
ad::Var crf_log_likelihood(ad::Tape& tape, ad::Var crf, std::span<const ad::Var> z,
                           const LabelSequence& labels);

// Unnormalized score of one sequence, without a tape.
double sequence_score(const ad::Tensor& crf, std::span<const ad::Tensor> z,
                      const LabelSequence& labels);

// Argmax label sequence. Ties prefer B. With `constrain_first_b`, sequences
// starting with I are excluded.
LabelSequence viterbi_decode(const ad::Tensor& crf, std::span<const ad::Tensor> z,
                             bool constrain_first_b);

// Encoded training/inference instance.
struct Example {
  std::vector<std::int32_t> ids;
  std::vector<EncodedBag> bags;  // one per position; ignored by the Q variant
  LabelSequence labels;          // empty at inference
};

// z_1..z_n for the configured variant.
std::vector<ad::Var> forward_z(ad::Tape& tape, const BoundParams& p, const ModelConfig& config,
                               const Example& ex);

// Negative log-likelihood of ex.labels.
ad::Var example_loss(ad::Tape& tape, const BoundParams& p, const ModelConfig& config,
                     const Example& ex);

LabelSequence predict_labels(const ModelParams& params, const ModelConfig& config,
                             const Example& ex);

Segmentation predict(const Query& q, std::span<const EncodedBag> bags, const ModelParams& params,
                     const ModelConfig& config, const Vocabulary& vocab);

}  // namespace qseg
