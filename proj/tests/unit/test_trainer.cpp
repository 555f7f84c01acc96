#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "qseg/errors.hpp"
#include "qseg/model_io.hpp"
#include "qseg/synth.hpp"
#include "qseg/trainer.hpp"

using namespace qseg;

namespace {

SynthCorpus tiny_corpus(std::uint64_t seed = 2) {
  SynthConfig c;
  c.seed = seed;
  c.alphabet_size = 30;
  c.vocab_size = 20;
  c.word_len = {1, 3};
  c.query_len = {2, 3};
  c.n_train = 40;
  c.n_test = 10;
  c.n_docs = 60;
  c.oov_fraction = 0.3;
  return generate(c);
}

TrainConfig tiny_config(Variant v = Variant::kQC) {
  TrainConfig tc;
  tc.variant = v;
  tc.char_dim = 4;
  tc.hidden_dim = 3;
  tc.distance_dim = 2;
  tc.feature_dim = 3;
  tc.batch_size = 8;
  tc.lr = 1e-2;
  tc.max_epochs = 4;
  return tc;
}

std::vector<LabeledQuery> numbered(std::size_t n) {
  std::vector<LabeledQuery> out;
  for (std::size_t i = 0; i < n; ++i) {
    const Text t(1, static_cast<Char>(U'a' + i));
    out.push_back({Query(t), Segmentation({t})});
  }
  return out;
}

std::string model_bytes(const SavedModel& m) {
  std::ostringstream out;
  save_model(out, m);
  return out.str();
}

std::vector<Example> examples_for(const SynthCorpus& corpus, const BigramIndex& index,
                                  const SavedModel& model) {
  std::vector<Example> out;
  for (const LabeledQuery& lq : corpus.train) {
    Example ex = make_example(lq.query, index, model);
    ex.labels = encode_labels(lq.gold);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

TEST(Split, SizesAndPartition) {
  const auto data = numbered(10);
  const auto [train, val] = split_train_val(data, 0.1, 7);
  EXPECT_EQ(train.size(), 9u);
  EXPECT_EQ(val.size(), 1u);
  std::set<Text> seen;
  for (const auto* part : {&train, &val}) {
    for (const LabeledQuery& lq : *part) seen.insert(lq.query.chars());
  }
  EXPECT_EQ(seen.size(), 10u);
  EXPECT_EQ(split_train_val(numbered(3), 0.1, 7).second.size(), 1u);
  EXPECT_THROW(split_train_val(std::vector<LabeledQuery>{}, 0.1, 7), EmptyDataset);
}

TEST(Split, SeedDetermined) {
  const auto data = numbered(30);
  const auto a = split_train_val(data, 0.2, 1);
  const auto b = split_train_val(data, 0.2, 1);
  EXPECT_EQ(format_labeled_queries(a.second), format_labeled_queries(b.second));
  const auto c = split_train_val(data, 0.2, 2);
  EXPECT_NE(format_labeled_queries(a.second), format_labeled_queries(c.second));
}

TEST(Config, ParseTextAndErrors) {
  TrainConfig tc;
  apply_config_text("# comment\nlr=0.01\n\nbatch_size = 16\nvariant=C\nexclude_self=true\n", tc);
  EXPECT_DOUBLE_EQ(tc.lr, 0.01);
  EXPECT_EQ(tc.batch_size, 16u);
  EXPECT_EQ(tc.variant, Variant::kC);
  EXPECT_TRUE(tc.exclude_self);
  EXPECT_THROW(apply_config_text("nope=1\n", tc), Error);
  EXPECT_THROW(apply_config_text("lr=abc\n", tc), Error);
  EXPECT_THROW(apply_config_entry("batch_size", "-3", tc), Error);
  TrainConfig bad;
  bad.lr = 0.0;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Config, KeyValueRoundTrip) {
  TrainConfig tc;
  tc.lr = 0.003;
  tc.variant = Variant::kQ;
  tc.patience = 3;
  TrainConfig back;
  apply_config_text(tc.to_kv(), back);
  EXPECT_EQ(back.to_kv(), tc.to_kv());
}

TEST(History, CsvFormat) {
  const std::vector<EpochRecord> h = {{1, 2.5, 0.25}, {2, 1.5, 0.5}};
  const std::string csv = format_history_csv(h);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,loss,val_f1");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_EQ(csv.substr(csv.find('\n') + 1, 2), "1,");
}

TEST(Gradient, SmallStepDescends) {
  const SynthCorpus corpus = tiny_corpus();
  const BigramIndex index(corpus.documents);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    TrainConfig tc = tiny_config();
    tc.max_epochs = 1;
    tc.seed = seed;
    SavedModel model = train(corpus.train, index, tc).model;
    model.params = ModelParams::init(model.config, seed);
    const std::vector<Example> examples = examples_for(corpus, index, model);
    std::vector<const Example*> batch;
    for (const Example& ex : examples) batch.push_back(&ex);
    ModelParams grads = ModelParams::zeros_like(model.params);
    const double before = batch_loss_and_grad(model.params, model.config, batch, grads);
    EXPECT_NEAR(before, mean_loss(model.params, model.config, examples), 1e-9 * before);
    ModelParams stepped = model.params;
    std::vector<ad::Tensor*> g;
    grads.for_each([&](std::string_view, ad::Tensor& t) { g.push_back(&t); });
    std::size_t k = 0;
    stepped.for_each([&](std::string_view, ad::Tensor& t) {
      for (std::size_t i = 0; i < t.size(); ++i) t[i] -= 1e-3 * (*g[k])[i];
      ++k;
    });
    EXPECT_LT(mean_loss(stepped, model.config, examples), before) << "seed " << seed;
  }
}

TEST(Gradient, ThreadCountDoesNotChangeResult) {
  const SynthCorpus corpus = tiny_corpus();
  const BigramIndex index(corpus.documents);
  TrainConfig tc = tiny_config();
  tc.max_epochs = 1;
  const SavedModel model = train(corpus.train, index, tc).model;
  const std::vector<Example> examples = examples_for(corpus, index, model);
  std::vector<const Example*> batch;
  for (const Example& ex : examples) batch.push_back(&ex);
  ModelParams g1 = ModelParams::zeros_like(model.params);
  ModelParams g3 = ModelParams::zeros_like(model.params);
  const double l1 = batch_loss_and_grad(model.params, model.config, batch, g1, 1);
  const double l3 = batch_loss_and_grad(model.params, model.config, batch, g3, 3);
  EXPECT_EQ(l1, l3);
  SavedModel ma = model, mb = model;
  ma.params = g1;
  mb.params = g3;
  EXPECT_EQ(model_bytes(ma), model_bytes(mb));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  const SynthCorpus corpus = tiny_corpus();
  const BigramIndex index(corpus.documents);
  TrainConfig tc = tiny_config();
  tc.max_epochs = 1;
  ModelParams params = train(corpus.train, index, tc).model.params;
  ModelParams grads = ModelParams::zeros_like(params);
  grads.crf.fill(-2.0);
  const ModelParams before = params;
  Adam adam(params, 0.5);
  adam.step(params, grads);
  EXPECT_EQ(adam.steps(), 1u);
  // Bias correction makes the first step lr * g / (|g| + eps).
  EXPECT_NEAR(params.crf[0] - before.crf[0], 0.5, 1e-6);
  EXPECT_EQ(params.proj, before.proj);
}

TEST(Train, DeterministicAndHistoryShape) {
  const SynthCorpus corpus = tiny_corpus();
  const BigramIndex index(corpus.documents);
  const TrainConfig tc = tiny_config();
  std::size_t callbacks = 0;
  const TrainResult a = train(corpus.train, index, tc, [&](const EpochRecord& r) {
    ++callbacks;
    EXPECT_EQ(r.epoch, callbacks);
  });
  const TrainResult b = train(corpus.train, index, tc);
  EXPECT_EQ(callbacks, a.history.size());
  EXPECT_LE(a.history.size(), tc.max_epochs);
  EXPECT_EQ(a.train_size + a.val_size, corpus.train.size());
  EXPECT_EQ(model_bytes(a.model), model_bytes(b.model));
  EXPECT_EQ(format_history_csv(a.history), format_history_csv(b.history));
  EXPECT_DOUBLE_EQ(a.best_val_f1, a.history[a.best_epoch - 1].val_f1);
  for (const EpochRecord& r : a.history) EXPECT_LE(r.val_f1, a.best_val_f1);
}

TEST(Train, ZeroPatienceStopsOneEpochAfterBest) {
  const SynthCorpus corpus = tiny_corpus(5);
  const BigramIndex index(corpus.documents);
  for (Variant v : {Variant::kQ, Variant::kC}) {
    TrainConfig tc = tiny_config(v);
    tc.patience = 0;
    tc.max_epochs = 30;
    const TrainResult r = train(corpus.train, index, tc);
    EXPECT_EQ(r.history.size(), std::min(r.best_epoch + 1, tc.max_epochs));
  }
}

TEST(Train, ThreadsGiveIdenticalModels) {
  const SynthCorpus corpus = tiny_corpus();
  const BigramIndex index(corpus.documents);
  TrainConfig tc = tiny_config();
  tc.max_epochs = 2;
  const TrainResult one = train(corpus.train, index, tc);
  tc.threads = 2;
  const TrainResult two = train(corpus.train, index, tc);
  EXPECT_EQ(model_bytes(one.model), model_bytes(two.model));
}

TEST(Segment, OutputsJoinToQueries) {
  const SynthCorpus corpus = tiny_corpus();
  const BigramIndex index(corpus.documents);
  TrainConfig tc = tiny_config();
  tc.max_epochs = 1;
  const SavedModel model = train(corpus.train, index, tc).model;
  std::vector<Query> queries;
  for (const LabeledQuery& lq : corpus.test) queries.push_back(lq.query);
  const auto segs = segment_queries(queries, index, model);
  ASSERT_EQ(segs.size(), queries.size());
  for (std::size_t i = 0; i < segs.size(); ++i) EXPECT_EQ(segs[i].joined(), queries[i].chars());
}
