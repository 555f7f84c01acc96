#include <benchmark/benchmark.h>

#include "qseg/baselines.hpp"
#include "qseg/context_index.hpp"
#include "qseg/synth.hpp"
#include "qseg/trainer.hpp"

using namespace qseg;

namespace {

const SynthCorpus& corpus() {
  static const SynthCorpus c = [] {
    SynthConfig sc;
    sc.oov_fraction = 0.5;
    return generate(sc);
  }();
  return c;
}

const BigramIndex& index() {
  static const BigramIndex idx(corpus().documents);
  return idx;
}

// Untrained model with the default dimensions; speed does not depend on weights.
SavedModel untrained(Variant v) {
  TrainConfig tc;
  tc.variant = v;
  tc.max_epochs = 1;
  const std::vector<LabeledQuery> few(corpus().train.begin(), corpus().train.begin() + 40);
  return train(few, index(), tc).model;
}

const SavedModel& model(Variant v = Variant::kQC) {
  static const SavedModel models[] = {untrained(Variant::kQ), untrained(Variant::kC), untrained(Variant::kQC)};
  return models[static_cast<int>(v)];
}

void BM_IndexBuild(benchmark::State& state) {
  SynthConfig sc;
  sc.n_docs = static_cast<std::size_t>(state.range(0));
  sc.oov_fraction = 0.5;
  const SynthCorpus c = generate(sc);
  for (auto _ : state) {
    BigramIndex idx(c.documents);
    benchmark::DoNotOptimize(idx);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_IndexBuild)->Arg(500)->Arg(3000);

void BM_FindContexts(benchmark::State& state) {
  const auto& test = corpus().test;
  std::size_t i = 0, positions = 0;
  for (auto _ : state) {
    const Query& q = test[i++ % test.size()].query;
    const SearchOptions search = query_search_options(SearchOptions{}, q);
    for (std::size_t p = 0; p < q.size(); ++p) benchmark::DoNotOptimize(find_contexts(index(), q, p, search));
    positions += q.size();
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(positions));
}
BENCHMARK(BM_FindContexts);

void BM_ForwardBackward(benchmark::State& state) {
  const SavedModel& m = model(static_cast<Variant>(state.range(0)));
  std::vector<Example> examples;
  for (std::size_t i = 0; i < 32; ++i) {
    const LabeledQuery& lq = corpus().train[i];
    Example ex = make_example(lq.query, index(), m);
    ex.labels = encode_labels(lq.gold);
    examples.push_back(std::move(ex));
  }
  std::vector<const Example*> batch;
  for (const Example& ex : examples) batch.push_back(&ex);
  ModelParams grads = ModelParams::zeros_like(m.params);
  for (auto _ : state) benchmark::DoNotOptimize(batch_loss_and_grad(m.params, m.config, batch, grads));
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_ForwardBackward)
    ->Arg(static_cast<int>(Variant::kQ))
    ->Arg(static_cast<int>(Variant::kC))
    ->Arg(static_cast<int>(Variant::kQC));

void BM_ViterbiDecode(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const ad::Tensor crf = model().params.crf;
  std::vector<ad::Tensor> z(n, ad::Tensor::zeros(crf.shape()[1]));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < z[i].size(); ++k) z[i][k] = static_cast<double>((i * 7 + k * 3) % 11) / 11.0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(viterbi_decode(crf, z, true));
}
BENCHMARK(BM_ViterbiDecode)->Arg(8)->Arg(32);

void BM_SegmentQuery(benchmark::State& state) {
  const auto& test = corpus().test;
  std::size_t i = 0;
  for (auto _ : state) {
    const std::vector<Query> one = {test[i++ % test.size()].query};
    benchmark::DoNotOptimize(segment_queries(one, index(), model()));
  }
}
BENCHMARK(BM_SegmentQuery);

void BM_Uns(benchmark::State& state) {
  std::vector<Query> queries;
  for (const LabeledQuery& lq : corpus().test) queries.push_back(lq.query);
  const NgramStats stats = build_stats(queries, corpus().documents, true, true);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(uns_segment(queries[i++ % queries.size()], stats));
}
BENCHMARK(BM_Uns);

}  // namespace
BENCHMARK_MAIN();
