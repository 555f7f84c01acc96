#include "qseg/cli.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "qseg/baselines.hpp"
#include "qseg/context_index.hpp"
#include "qseg/corpus.hpp"
#include "qseg/distant_labeler.hpp"
#include "qseg/errors.hpp"
#include "qseg/evaluation.hpp"
#include "qseg/feature_extractor.hpp"
#include "qseg/model_io.hpp"
#include "qseg/synth.hpp"
#include "qseg/trainer.hpp"

namespace qseg::cli {
namespace {

class UsageError : public Error {
  using Error::Error;
};

// Re-raises load failures with the offending path in the message.
template <typename F>
auto load(const std::string& path, F&& parse) {
  const std::string text = read_file(path);
  try {
    return parse(text);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

std::vector<LabeledQuery> load_labeled(const std::string& path) {
  return load(path, [](const std::string& t) { return parse_labeled_queries(t); });
}

std::vector<Query> load_queries(const std::string& path) {
  return load(path, [](const std::string& t) { return parse_queries(t); });
}

// Documents plus their bigram index; the index points into `docs`, so this
// is built in place and never moved.
struct Corpus {
  DocumentSet docs;
  std::optional<BigramIndex> index;

  Corpus(const std::string& docs_path, const std::string& index_path) {
    docs = load(docs_path, [](const std::string& t) { return parse_documents(t); });
    if (index_path.empty()) {
      index.emplace(docs);
    } else {
      std::ifstream in(index_path, std::ios::binary);
      if (!in) throw Error("cannot open " + index_path);
      index.emplace(BigramIndex::load(in, docs));
    }
  }
  Corpus(const Corpus&) = delete;
  Corpus& operator=(const Corpus&) = delete;
};

void write_output(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_file(path, text);
  }
}

struct SynthArgs {
  std::string out_dir;
  SynthConfig config;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const SynthCorpus corpus = generate(a.config);
  const std::filesystem::path dir(a.out_dir);
  std::filesystem::create_directories(dir);
  std::vector<Query> train_queries, test_queries;
  for (const LabeledQuery& lq : corpus.train) train_queries.push_back(lq.query);
  for (const LabeledQuery& lq : corpus.test) test_queries.push_back(lq.query);
  write_file((dir / "dict.txt").string(), format_dictionary(corpus.dictionary));
  write_file((dir / "train.tsv").string(), format_labeled_queries(corpus.train));
  write_file((dir / "test.tsv").string(), format_labeled_queries(corpus.test));
  write_file((dir / "docs.txt").string(), format_documents(corpus.documents));
  write_file((dir / "train_queries.txt").string(), format_queries(train_queries));
  write_file((dir / "test_queries.txt").string(), format_queries(test_queries));
  out << "dictionary=" << corpus.dictionary.size() << "\n"
      << "held_out_words=" << corpus.held_out_words.size() << "\n"
      << "train_queries=" << corpus.train.size() << "\n"
      << "test_queries=" << corpus.test.size() << "\n"
      << "documents=" << corpus.documents.size() << "\n";
  return kOk;
}

struct AutolabelArgs {
  std::string queries, dict, out;
};

int cmd_autolabel(const AutolabelArgs& a, std::ostream& out) {
  const auto queries = load_queries(a.queries);
  const Dictionary dict = load(a.dict, [](const std::string& t) { return parse_dictionary(t); });
  const AutolabelResult result = autolabel_corpus(queries, dict);
  write_file(a.out, format_labeled_queries(result.labeled));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", result.coverage());
  out << "total=" << result.total << "\ncovered=" << result.covered() << "\ncoverage=" << buf
      << "\n";
  return kOk;
}

struct IndexArgs {
  std::string docs, out;
};

int cmd_index(const IndexArgs& a, std::ostream& out) {
  const Corpus corpus(a.docs, "");
  std::ofstream file(a.out, std::ios::binary | std::ios::trunc);
  if (!file) throw Error("cannot write " + a.out);
  corpus.index->save(file);
  if (!file) throw Error("write failed: " + a.out);
  out << "sentences=" << corpus.docs.size() << "\nbigrams=" << corpus.index->bigram_count()
      << "\n";
  return kOk;
}

struct FeaturesArgs {
  std::string queries, docs, index, out;
  std::size_t cap = 5, window = 2, max_distance = 7;
  std::uint64_t seed = 1;
  bool exclude_self = false;
  bool dump = false;
};

int cmd_features(const FeaturesArgs& a, std::ostream& out) {
  if (a.cap < 1 || a.window < 1 || a.max_distance < 1) {
    throw UsageError("--cap, --window and --max-distance must be positive");
  }
  const Corpus corpus(a.docs, a.index);
  const auto queries = load_queries(a.queries);
  const SearchOptions search{a.cap, a.seed, a.exclude_self};
  const FeatureOptions features{a.window, static_cast<std::uint32_t>(a.max_distance)};
  std::string text;
  std::vector<std::vector<EncodedBag>> encoded;
  const Vocabulary vocab = a.dump ? Vocabulary{} : Vocabulary::build(queries, corpus.docs);
  for (const Query& q : queries) {
    const auto bags =
        build_feature_bags(q, *corpus.index, query_search_options(search, q), features);
    if (a.dump) {
      text += dump_feature_bags(q, bags);
      continue;
    }
    auto& row = encoded.emplace_back();
    for (const FeatureBag& bag : bags) row.push_back(encode_bag(bag, vocab));
  }
  if (!a.dump) {
    std::ostringstream bin;
    write_feature_bags(bin, a.window, encoded);
    text = bin.str();
  }
  write_output(a.out, text, out);
  return kOk;
}

struct TrainArgs {
  std::string train, docs, index, config, model, history;
  std::map<std::string, std::string> overrides;  // config key -> value
  bool exclude_self = false;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  TrainConfig config;
  if (!a.config.empty()) apply_config_text(read_file(a.config), config);
  try {
    for (const auto& [key, value] : a.overrides) apply_config_entry(key, value, config);
    if (a.exclude_self) config.exclude_self = true;
    config.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }

  const Corpus corpus(a.docs, a.index);
  const auto dataset = load_labeled(a.train);
  const TrainResult result = train(dataset, *corpus.index, config, [&](const EpochRecord& r) {
    if (a.quiet) return;
    char buf[96];
    std::snprintf(buf, sizeof buf, "epoch %zu loss %.6f val_f1 %.6f\n", r.epoch, r.train_loss,
                  r.val_f1);
    err << buf << std::flush;
  });

  save_model_file(a.model, result.model);
  if (!a.history.empty()) write_file(a.history, format_history_csv(result.history));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", result.best_val_f1);
  out << "train_size=" << result.train_size << "\nval_size=" << result.val_size
      << "\nepochs=" << result.history.size() << "\nbest_epoch=" << result.best_epoch
      << "\nbest_val_f1=" << buf << "\n";
  return kOk;
}

struct SegmentArgs {
  std::string model, queries, docs, index, variant, out;
};

int cmd_segment(const SegmentArgs& a, std::ostream& out) {
  const SavedModel model = load_model_file(a.model);
  if (!a.variant.empty()) {
    Variant requested;
    try {
      requested = parse_variant(a.variant);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    if (requested != model.config.variant) {
      throw UsageError("--variant " + std::string(variant_name(requested)) +
                       " does not match the model's variant " +
                       std::string(variant_name(model.config.variant)));
    }
  }
  const auto queries = load_queries(a.queries);
  std::optional<Corpus> corpus;
  std::optional<DocumentSet> empty_docs;
  std::optional<BigramIndex> empty_index;
  const BigramIndex* index = nullptr;
  if (!a.docs.empty()) {
    corpus.emplace(a.docs, a.index);
    index = &*corpus->index;
  } else if (model.config.variant == Variant::kQ) {
    empty_docs.emplace();
    empty_index.emplace(*empty_docs);
    index = &*empty_index;
  } else {
    throw UsageError("--docs is required for a model with variant " +
                     std::string(variant_name(model.config.variant)));
  }
  write_output(a.out, format_segmentations(segment_queries(queries, *index, model)), out);
  return kOk;
}

struct EvalArgs {
  std::string pred, gold, train, report;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto pred = load_labeled(a.pred);
  const auto gold = load_labeled(a.gold);
  std::vector<Segmentation> p, g;
  for (const LabeledQuery& lq : pred) p.push_back(lq.gold);
  for (const LabeledQuery& lq : gold) g.push_back(lq.gold);
  std::optional<SegmentVocab> vocab;
  if (!a.train.empty()) vocab = segment_vocab(load_labeled(a.train));
  const Metrics m = evaluate(p, g, vocab ? &*vocab : nullptr);
  out << format_report_text(m);
  if (!a.report.empty()) write_file(a.report, format_report_kv(m));
  return kOk;
}

struct UnsArgs {
  std::string queries, stats_queries, docs, out;
  bool no_queries = false, no_documents = false;
  std::size_t max_len = kDefaultNgramMax;
};

int cmd_uns(const UnsArgs& a, std::ostream& out) {
  if (a.no_queries && a.no_documents) {
    throw UsageError("--no-queries and --no-documents leave no statistics source");
  }
  if (!a.no_documents && a.docs.empty()) throw UsageError("--docs is required unless --no-documents");
  const auto queries = load_queries(a.queries);
  std::vector<Query> stats_queries;
  if (!a.no_queries) {
    stats_queries = a.stats_queries.empty() ? queries : load_queries(a.stats_queries);
  }
  DocumentSet docs;
  if (!a.no_documents) {
    docs = load(a.docs, [](const std::string& t) { return parse_documents(t); });
  }
  const NgramStats stats = build_stats(stats_queries, docs, !a.no_queries, !a.no_documents,
                                       a.max_len);
  std::vector<Segmentation> segs;
  segs.reserve(queries.size());
  for (const Query& q : queries) segs.push_back(uns_segment(q, stats));
  write_output(a.out, format_segmentations(segs), out);
  return kOk;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return kUsage;
  if (dynamic_cast<const NonFiniteLoss*>(&e)) return kNumeric;
  return kData;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Query segmentation toolkit", args.empty() ? "qseg" : args.front()};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic corpus");
  s->add_option("--out-dir", synth.out_dir, "Output directory")->required();
  s->add_option("--seed", synth.config.seed)->capture_default_str();
  s->add_option("--alphabet", synth.config.alphabet_size, "Alphabet size")->capture_default_str();
  s->add_option("--vocab", synth.config.vocab_size, "Number of words")->capture_default_str();
  s->add_option("--train", synth.config.n_train, "Training queries")->capture_default_str();
  s->add_option("--test", synth.config.n_test, "Test queries")->capture_default_str();
  s->add_option("--docs", synth.config.n_docs, "Document sentences")->capture_default_str();
  s->add_option("--oov", synth.config.oov_fraction, "Held-out word fraction")
      ->capture_default_str();
  s->add_option("--min-contexts", synth.config.min_contexts)->capture_default_str();
  s->add_option("--min-word-len", synth.config.word_len.min)->capture_default_str();
  s->add_option("--max-word-len", synth.config.word_len.max)->capture_default_str();
  s->add_option("--min-query-words", synth.config.query_len.min)->capture_default_str();
  s->add_option("--max-query-words", synth.config.query_len.max)->capture_default_str();

  AutolabelArgs autolabel;
  auto* al = app.add_subcommand("autolabel", "Label queries by dictionary max-matching");
  al->add_option("--queries", autolabel.queries, "One query per line")->required();
  al->add_option("--dict", autolabel.dict, "One word per line")->required();
  al->add_option("--out", autolabel.out, "Labeled output (TAB-separated segments)")->required();

  IndexArgs index;
  auto* ix = app.add_subcommand("index", "Build the bigram index over documents");
  ix->add_option("--docs", index.docs)->required();
  ix->add_option("--out", index.out)->required();

  FeaturesArgs features;
  auto* fe = app.add_subcommand("features", "Extract context features for queries");
  fe->add_option("--queries", features.queries)->required();
  fe->add_option("--docs", features.docs)->required();
  fe->add_option("--index", features.index, "Prebuilt index for --docs");
  fe->add_option("--out", features.out, "Output file (default stdout)");
  fe->add_option("--cap", features.cap, "Contexts per character")->capture_default_str();
  fe->add_option("--window", features.window)->capture_default_str();
  fe->add_option("--max-distance", features.max_distance)->capture_default_str();
  fe->add_option("--seed", features.seed)->capture_default_str();
  fe->add_flag("--exclude-self", features.exclude_self, "Skip sentences equal to the query");
  fe->add_flag("--dump", features.dump, "Write a readable listing instead of the binary stream");

  TrainArgs trainer;
  auto* tr = app.add_subcommand("train", "Train the sequence labeler");
  tr->add_option("--train", trainer.train, "Labeled training queries")->required();
  tr->add_option("--docs", trainer.docs)->required();
  tr->add_option("--index", trainer.index, "Prebuilt index for --docs");
  tr->add_option("--config", trainer.config, "key=value config file; flags override it");
  tr->add_option("--model", trainer.model, "Output model file")->required();
  tr->add_option("--history", trainer.history, "Per-epoch CSV (epoch,loss,val_f1)");
  tr->add_flag("--exclude-self", trainer.exclude_self);
  tr->add_flag("--quiet", trainer.quiet, "No per-epoch progress");
  const std::vector<std::pair<std::string, std::string>> train_flags = {
      {"--lr", "lr"},
      {"--batch-size", "batch_size"},
      {"--val-fraction", "val_fraction"},
      {"--patience", "patience"},
      {"--epochs", "max_epochs"},
      {"--seed", "seed"},
      {"--cap", "context_cap"},
      {"--window", "window"},
      {"--max-distance", "max_distance"},
      {"--variant", "variant"},
      {"--char-dim", "char_dim"},
      {"--hidden-dim", "hidden_dim"},
      {"--distance-dim", "distance_dim"},
      {"--feature-dim", "feature_dim"},
      {"--threads", "threads"},
  };
  std::map<std::string, std::string> train_values;
  for (const auto& [flag, key] : train_flags) tr->add_option(flag, train_values[key]);

  SegmentArgs segment;
  auto* sg = app.add_subcommand("segment", "Segment queries with a trained model");
  sg->add_option("--model", segment.model)->required();
  sg->add_option("--queries", segment.queries)->required();
  sg->add_option("--docs", segment.docs, "Required unless the model is variant q");
  sg->add_option("--index", segment.index, "Prebuilt index for --docs");
  sg->add_option("--variant", segment.variant, "Must match the model: q, c or qc");
  sg->add_option("--out", segment.out, "Output file (default stdout)");

  EvalArgs eval;
  auto* ev = app.add_subcommand("eval", "Score predicted against gold segmentations");
  ev->add_option("--pred", eval.pred)->required();
  ev->add_option("--gold", eval.gold)->required();
  ev->add_option("--train", eval.train, "Training file for IV/OV recall");
  ev->add_option("--report", eval.report, "key=value report file");

  UnsArgs uns;
  auto* un = app.add_subcommand("uns", "Unsupervised frequency/MI segmentation");
  un->add_option("--queries", uns.queries, "Queries to segment")->required();
  un->add_option("--docs", uns.docs);
  un->add_option("--stats-queries", uns.stats_queries,
                 "Queries counted for statistics (default --queries)");
  un->add_flag("--no-queries", uns.no_queries, "Do not count queries");
  un->add_flag("--no-documents", uns.no_documents, "Do not count documents");
  un->add_option("--max-len", uns.max_len, "Longest counted n-gram")->capture_default_str();
  un->add_option("--out", uns.out, "Output file (default stdout)");

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  if (args.empty()) argv.push_back("qseg");
  for (const std::string& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  try {
    if (app.got_subcommand(s)) return cmd_synth(synth, out);
    if (app.got_subcommand(al)) return cmd_autolabel(autolabel, out);
    if (app.got_subcommand(ix)) return cmd_index(index, out);
    if (app.got_subcommand(fe)) return cmd_features(features, out);
    if (app.got_subcommand(tr)) {
      for (const auto& [flag, key] : train_flags) {
        if (tr->count(flag) > 0) trainer.overrides[key] = train_values[key];
      }
      return cmd_train(trainer, out, err);
    }
    if (app.got_subcommand(sg)) return cmd_segment(segment, out);
    if (app.got_subcommand(ev)) return cmd_eval(eval, out);
    if (app.got_subcommand(un)) return cmd_uns(uns, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kUsage;
}

}  // namespace qseg::cli
