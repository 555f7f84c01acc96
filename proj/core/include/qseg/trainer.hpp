#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qseg/context_index.hpp"
#include "qseg/corpus.hpp"
#include "qseg/feature_extractor.hpp"
#include "qseg/model_io.hpp"
#include "qseg/seqlab_model.hpp"

namespace qseg {

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch_size = 32;
  double val_fraction = 0.10;
  std::size_t patience = 10;
  std::size_t max_epochs = 100;
  std::uint64_t seed = 1;
  std::size_t context_cap = 5;
  std::size_t window = 2;
  std::size_t max_distance = 7;
  Variant variant = Variant::kQC;
  std::size_t char_dim = 10;
  std::size_t hidden_dim = 10;
  std::size_t distance_dim = 5;
  std::size_t feature_dim = 10;
  bool exclude_self = false;
  std::size_t threads = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  // Throws Error on out-of-range values.
  void validate() const;
  std::string to_kv() const;
};

// Applies `key=value` lines (blank lines and '#' comments ignored) on top of
// `config`. Throws Error on unknown keys or unparsable values.
void apply_config_text(std::string_view text, TrainConfig& config);
void apply_config_entry(std::string_view key, std::string_view value, TrainConfig& config);

// Seeded shuffle split. Validation gets round(fraction * N) items, at least 1.
// Throws EmptyDataset.
std::pair<std::vector<LabeledQuery>, std::vector<LabeledQuery>> split_train_val(
    std::span<const LabeledQuery> dataset, double val_fraction, std::uint64_t seed);

// Context search for a query uses a seed derived from the run seed and the
// query text, so a query gets the same bags wherever it appears.
SearchOptions query_search_options(const SearchOptions& base, const Query& q);

std::vector<EncodedBag> encode_feature_bags(const Query& q, const BigramIndex& index,
                                            const SearchOptions& search,
                                            const FeatureOptions& features,
                                            const Vocabulary& vocab);

// Builds the model input for q; bags are skipped for the Q variant.
Example make_example(const Query& q, const BigramIndex& index, const SavedModel& model);

class Adam {
 public:
  Adam(const ModelParams& like, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double epsilon = 1e-8);
  void step(ModelParams& params, const ModelParams& grads);
  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, epsilon_;
  std::size_t t_ = 0;
  ModelParams m_, v_;
};

// Mean negative log-likelihood of `batch`; writes the gradient of that mean
// into `grads` (overwritten). Per-example gradients are summed in batch order
// regardless of `threads`.
double batch_loss_and_grad(const ModelParams& params, const ModelConfig& config,
                           std::span<const Example* const> batch, ModelParams& grads,
                           std::size_t threads = 1);

double mean_loss(const ModelParams& params, const ModelConfig& config,
                 std::span<const Example> examples);

struct EpochRecord {
  std::size_t epoch;  // 1-based
  double train_loss;
  double val_f1;
};

struct TrainResult {
  SavedModel model;  // weights from the best validation epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_f1 = 0.0;
  std::size_t train_size = 0;
  std::size_t val_size = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch maximum likelihood with Adam and early stopping on validation
// segment F1. Training stops once F1 has not improved for max(patience, 1)
// consecutive epochs. Throws NonFiniteLoss if a batch loss is not finite.
TrainResult train(std::span<const LabeledQuery> dataset, const BigramIndex& index,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

// "epoch,loss,val_f1" header plus one row per epoch.
std::string format_history_csv(std::span<const EpochRecord> history);

// Runs the trained model over queries.
std::vector<Segmentation> segment_queries(std::span<const Query> queries, const BigramIndex& index,
                                          const SavedModel& model);

}  // namespace qseg
