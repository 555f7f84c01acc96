// Acceptance suite. Runs every criterion (or those named on the command
// line, e.g. `qseg_acceptance 1 4 8`) and prints one PASS/FAIL line each.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "oracles.hpp"
#include "qseg/baselines.hpp"
#include "qseg/cli.hpp"
#include "qseg/context_index.hpp"
#include "qseg/corpus.hpp"
#include "qseg/evaluation.hpp"
#include "qseg/feature_extractor.hpp"
#include "qseg/seqlab_model.hpp"
#include "qseg/synth.hpp"
#include "qseg/trainer.hpp"

using namespace qseg;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome crf_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  double worst_z = 0.0, worst_ll = 0.0, worst_vit = 0.0;
  for (int inst = 0; inst < 200; ++inst) {
    const std::size_t n = 1 + inst % 8;
    const std::size_t dim = 1 + rng() % 6;
    const ad::Tensor crf = oracle::random_tensor(kPairCount, dim, rng);
    std::vector<ad::Tensor> z;
    for (std::size_t i = 0; i < n; ++i) z.push_back(oracle::random_vector(dim, rng));

    ad::Tape tape;
    const ad::Var w = tape.constant(crf);
    std::vector<ad::Var> zv;
    for (const auto& t : z) zv.push_back(tape.constant(t));
    const double log_z = tape.scalar(crf_log_partition(tape, w, zv));
    const double ref_log_z = oracle::log_partition(crf, z);
    worst_z = std::max(worst_z, oracle::relative_error(log_z, ref_log_z));

    LabelSequence y = oracle::labels_from_mask(static_cast<std::uint32_t>(rng()), n);
    const double ll = tape.scalar(crf_log_likelihood(tape, w, zv, y));
    const double ref_ll = oracle::path_score(crf, z, y) - ref_log_z;
    worst_ll = std::max(worst_ll, oracle::relative_error(ll, ref_ll));

    for (bool first_b : {false, true}) {
      const LabelSequence best = viterbi_decode(crf, z, first_b);
      if (first_b && best.front() != Tag::B) worst_vit = 1.0;
      const double got = oracle::path_score(crf, z, best);
      worst_vit = std::max(worst_vit, std::abs(got - oracle::max_score(crf, z, first_b)));
    }
  }
  const double secs = seconds_since(t0);
  const bool pass = worst_z <= 1e-8 && worst_ll <= 1e-8 && worst_vit <= 1e-10 && secs < 10;
  return {pass, "max rel err logZ " + fmt("%.2e", worst_z) + ", loglik " + fmt("%.2e", worst_ll) +
                    ", viterbi score gap " + fmt("%.2e", worst_vit) + ", " + fmt("%.2fs", secs)};
}

// ---------------------------------------------------------------------------

EncodedContext random_context(std::mt19937_64& rng, const ModelConfig& c) {
  EncodedContext ctx;
  for (EncodedSide* side : {&ctx.left, &ctx.right}) {
    for (std::size_t k = 0; k < c.window; ++k) {
      side->ids.push_back(static_cast<std::int32_t>(rng() % c.vocab_size));
    }
    side->distance = static_cast<std::int32_t>(1 + rng() % c.max_distance);
  }
  return ctx;
}

Example random_example(std::mt19937_64& rng, const ModelConfig& c) {
  Example ex;
  const std::size_t n = 1 + rng() % 5;
  for (std::size_t i = 0; i < n; ++i) {
    ex.ids.push_back(static_cast<std::int32_t>(rng() % c.vocab_size));
    EncodedBag bag(rng() % 4);
    for (EncodedContext& ctx : bag) ctx = random_context(rng, c);
    ex.bags.push_back(std::move(bag));
    ex.labels.push_back(i == 0 || rng() % 2 ? Tag::B : Tag::I);
  }
  return ex;
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  ModelConfig c;
  c.vocab_size = 9;
  c.char_dim = 4;
  c.hidden_dim = 3;
  c.distance_dim = 2;
  c.feature_dim = 3;
  c.window = 2;
  c.max_distance = 4;
  c.variant = Variant::kQC;
  double worst = 0.0;
  std::string worst_name;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    ModelParams params = ModelParams::init(c, seed);
    // Spread the weights out so no gradient is trivially near zero.
    params.for_each([&](std::string_view, ad::Tensor& t) {
      for (double& x : t.values()) x += std::normal_distribution<double>(0.0, 0.3)(rng);
    });
    const Example ex = random_example(rng, c);
    const auto loss = [&] {
      ad::Tape tape;
      return tape.scalar(example_loss(tape, bind(tape, params), c, ex));
    };
    ModelParams grads = ModelParams::zeros_like(params);
    {
      ad::Tape tape;
      tape.backward(example_loss(tape, bind(tape, params, &grads), c, ex));
    }
    std::vector<ad::Tensor*> g;
    grads.for_each([&](std::string_view, ad::Tensor& t) { g.push_back(&t); });
    std::size_t k = 0;
    params.for_each([&](std::string_view name, ad::Tensor& t) {
      const auto numeric = oracle::finite_difference(t, loss, 1e-4);
      const double err = oracle::tensor_relative_error(g[k++]->values(), numeric);
      if (err > worst) {
        worst = err;
        worst_name = std::string(name) + " (seed " + std::to_string(seed) + ")";
      }
    });
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 30,
          "max rel err " + fmt("%.2e", worst) + " at " + worst_name + ", " + fmt("%.2fs", secs)};
}

// ---------------------------------------------------------------------------

Outcome worked_examples() {
  std::vector<std::string> problems;
  const Segmentation seg({U"高腰", U"连衣裙", U"白色"});
  const LabelSequence labels = encode_labels(seg);
  const std::string got = format_labels(labels);
  if (got != "B I B I I B I") problems.push_back("labels " + got);

  const Query q(U"高腰连衣裙白色");
  const Text sentence = U"流行的连衣裙好看";
  const std::size_t center = 4;  // 衣
  const Alignment a = subtract_align(q, 3, sentence, center);
  if (a.left != 2 || a.right != 2) {
    problems.push_back("k_l=" + std::to_string(a.left) + " k_r=" + std::to_string(a.right));
  }
  const ContextFeature f = extract_side_features(q, 3, sentence, center, FeatureOptions{2, 7});
  if (f.left.window != std::vector<Char>{U'行', U'的'}) {
    problems.push_back("left window " + to_utf8(Text(f.left.window.begin(), f.left.window.end())));
  }
  std::string detail = "labels " + got + "; k_l=" + std::to_string(a.left) +
                       " k_r=" + std::to_string(a.right) + " left window " +
                       to_utf8(Text(f.left.window.begin(), f.left.window.end()));
  return {problems.empty(), detail};
}

// ---------------------------------------------------------------------------

Outcome attention_properties() {
  ModelConfig c;
  c.vocab_size = 12;
  c.char_dim = 4;
  c.hidden_dim = 3;
  c.distance_dim = 2;
  c.feature_dim = 3;
  c.max_distance = 5;
  std::mt19937_64 rng(7);
  double sum_err = 0.0, single_err = 0.0, dup_err = 0.0, perm_err = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const ModelParams params = ModelParams::init(c, seed);
    const ad::Tensor h = oracle::random_vector(c.query_dim(), rng);
    EncodedBag bag(2 + rng() % 4);
    for (EncodedContext& ctx : bag) ctx = random_context(rng, c);

    const auto run = [&](const EncodedBag& b) {
      ad::Tape tape;
      const BoundParams p = bind(tape, params);
      const BagEncoding enc = encode_bag(tape, p, b, tape.constant(h), c.feature_dim);
      return std::pair{tape.value(enc.alphas), tape.value(enc.b)};
    };

    const auto [alphas, b] = run(bag);
    double s = 0.0;
    for (double x : alphas.values()) s += x;
    sum_err = std::max(sum_err, std::abs(s - 1.0));

    const auto [a1, b1] = run(EncodedBag{bag.front()});
    single_err = std::max(single_err, std::abs(a1[0] - 1.0));

    const auto [a2, b2] = run(EncodedBag{bag.front(), bag.front()});
    dup_err = std::max({dup_err, std::abs(a2[0] - 0.5), std::abs(a2[1] - 0.5)});

    EncodedBag shuffled = bag;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto [ap, bp] = run(shuffled);
    for (std::size_t k = 0; k < b.size(); ++k) perm_err = std::max(perm_err, std::abs(b[k] - bp[k]));
  }
  const bool pass = sum_err <= 1e-12 && single_err == 0.0 && dup_err <= 1e-12 && perm_err <= 1e-12;
  return {pass, "|sum-1| " + fmt("%.1e", sum_err) + ", singleton " + fmt("%.1e", single_err) +
                    ", duplicate " + fmt("%.1e", dup_err) + ", permutation " +
                    fmt("%.1e", perm_err)};
}

// ---------------------------------------------------------------------------

struct RunResult {
  Metrics metrics;
  std::size_t epochs;
  double seconds;
};

RunResult train_and_test(const SynthCorpus& corpus, Variant variant, std::uint64_t seed) {
  const auto t0 = Clock::now();
  const BigramIndex index(corpus.documents);
  TrainConfig tc;
  tc.variant = variant;
  tc.seed = seed;
  const TrainResult trained = train(corpus.train, index, tc);
  std::vector<Query> queries;
  std::vector<Segmentation> gold;
  for (const LabeledQuery& lq : corpus.test) {
    queries.push_back(lq.query);
    gold.push_back(lq.gold);
  }
  const auto pred = segment_queries(queries, index, trained.model);
  const SegmentVocab vocab = segment_vocab(corpus.train);
  return {evaluate(pred, gold, &vocab), trained.history.size(), seconds_since(t0)};
}

SynthConfig synth_config(std::uint64_t seed, double oov, std::size_t n_docs) {
  SynthConfig sc;
  sc.seed = seed;
  sc.vocab_size = 200;
  sc.n_train = 2000;
  sc.n_test = 500;
  sc.n_docs = n_docs;
  sc.oov_fraction = oov;
  return sc;
}

Outcome in_vocabulary_learning() {
  const SynthCorpus corpus = generate(synth_config(1, 0.0, 3000));
  const RunResult r = train_and_test(corpus, Variant::kQ, 1);
  const bool pass = r.metrics.f1 >= 0.90 && r.epochs <= 100 && r.seconds < 15 * 60;
  return {pass, "test F1 " + fmt("%.4f", r.metrics.f1) + " after " + std::to_string(r.epochs) +
                    " epochs, " + fmt("%.1fs", r.seconds)};
}

Outcome oov_benefit() {
  double f1_q = 0, f1_qc = 0, ov_q = 0, ov_qc = 0;
  std::string per_seed;
  for (std::uint64_t seed : {1, 2, 3}) {
    const SynthCorpus corpus = generate(synth_config(seed, 0.5, 3000));
    const RunResult q = train_and_test(corpus, Variant::kQ, seed);
    const RunResult qc = train_and_test(corpus, Variant::kQC, seed);
    f1_q += q.metrics.f1 / 3;
    f1_qc += qc.metrics.f1 / 3;
    ov_q += q.metrics.recall_ov.value_or(0.0) / 3;
    ov_qc += qc.metrics.recall_ov.value_or(0.0) / 3;
    per_seed += " [seed " + std::to_string(seed) + ": Q " + fmt("%.3f", q.metrics.f1) + " QC " +
                fmt("%.3f", qc.metrics.f1) + "]";
  }
  const bool pass = f1_qc - f1_q >= 0.03 && ov_qc - ov_q >= 0.05;
  return {pass, "mean F1 Q " + fmt("%.4f", f1_q) + " QC " + fmt("%.4f", f1_qc) + ", Recall-OV Q " +
                    fmt("%.4f", ov_q) + " QC " + fmt("%.4f", ov_qc) + ";" + per_seed};
}

double context_coverage(const SynthCorpus& corpus) {
  const BigramIndex index(corpus.documents);
  std::size_t chars = 0, covered = 0;
  for (const LabeledQuery& lq : corpus.test) {
    for (std::size_t i = 0; i < lq.query.size(); ++i) {
      ++chars;
      if (!find_contexts(index, lq.query, i, SearchOptions{}).items.empty()) ++covered;
    }
  }
  return static_cast<double>(covered) / static_cast<double>(chars);
}

Outcome document_trend() {
  const std::vector<std::size_t> sizes = {500, 1500, 3000};
  bool monotone = true;
  std::string coverage;
  double f1_small = 0, f1_large = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    double prev = -1.0;
    coverage += " [seed " + std::to_string(seed) + ":";
    for (std::size_t n : sizes) {
      const SynthCorpus corpus = generate(synth_config(seed, 0.5, n));
      const double cov = context_coverage(corpus);
      coverage += " " + fmt("%.3f", cov);
      monotone = monotone && cov >= prev;
      prev = cov;
      if (n == sizes.front()) f1_small += train_and_test(corpus, Variant::kC, seed).metrics.f1 / 3;
      if (n == sizes.back()) f1_large += train_and_test(corpus, Variant::kC, seed).metrics.f1 / 3;
    }
    coverage += "]";
  }
  const bool pass = monotone && f1_large > f1_small;
  return {pass, "C mean F1 at 500 docs " + fmt("%.4f", f1_small) + ", at 3000 docs " +
                    fmt("%.4f", f1_large) + "; coverage" + coverage};
}

// ---------------------------------------------------------------------------

Outcome uns_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(99);
  const auto random_text = [&](std::size_t len, std::size_t alphabet) {
    Text t;
    for (std::size_t k = 0; k < len; ++k) t.push_back(U'a' + static_cast<Char>(rng() % alphabet));
    return t;
  };
  DocumentSet docs;
  for (int k = 0; k < 300; ++k) docs.sentences.push_back(random_text(5 + rng() % 20, 6));
  std::vector<Query> stat_queries;
  for (int k = 0; k < 100; ++k) stat_queries.emplace_back(random_text(2 + rng() % 8, 6));
  const NgramStats stats = build_stats(stat_queries, docs, true, true);

  std::size_t score_mismatch = 0, seq_mismatch = 0;
  for (int k = 0; k < 500; ++k) {
    const Query q(random_text(1 + rng() % 10, 7));
    const Segmentation dp = uns_segment(q, stats);
    const oracle::SegChoice best = oracle::exhaustive_uns(q, stats);
    if (segmentation_score(dp, stats) != best.score) ++score_mismatch;
    if (cut_positions(dp) != best.cuts) ++seq_mismatch;
  }
  const double secs = seconds_since(t0);
  return {score_mismatch == 0 && seq_mismatch == 0 && secs < 5,
          std::to_string(score_mismatch) + " score and " + std::to_string(seq_mismatch) +
              " segmentation mismatches over 500 queries, " + fmt("%.2fs", secs)};
}

// ---------------------------------------------------------------------------

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "qseg");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) std::fprintf(stderr, "qseg %s failed: %s\n", args[1].c_str(), err.str().c_str());
  return code;
}

bool pipeline(const std::filesystem::path& dir, const std::string& threads) {
  const std::string d = dir.string() + "/";
  return cli({"synth", "--out-dir", d, "--seed", "5", "--train", "400", "--test", "100", "--docs",
              "600", "--oov", "0.3"}) == 0 &&
         cli({"autolabel", "--queries", d + "train_queries.txt", "--dict", d + "dict.txt", "--out",
              d + "auto.tsv"}) == 0 &&
         cli({"index", "--docs", d + "docs.txt", "--out", d + "index.bin"}) == 0 &&
         cli({"train", "--train", d + "auto.tsv", "--docs", d + "docs.txt", "--index",
              d + "index.bin", "--model", d + "model.bin", "--history", d + "history.csv",
              "--epochs", "8", "--seed", "5", "--variant", "qc", "--threads", threads,
              "--quiet"}) == 0 &&
         cli({"segment", "--model", d + "model.bin", "--queries", d + "test_queries.txt", "--docs",
              d + "docs.txt", "--index", d + "index.bin", "--variant", "qc", "--out",
              d + "pred.tsv"}) == 0 &&
         cli({"eval", "--pred", d + "pred.tsv", "--gold", d + "test.tsv", "--train",
              d + "train.tsv", "--report", d + "report.txt"}) == 0;
}

Outcome determinism() {
  const auto root = std::filesystem::temp_directory_path() /
                    ("qseg_acceptance_" + std::to_string(::getpid()));
  std::filesystem::remove_all(root);
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"a", "1"}, {"b", "1"}, {"c", "2"}};
  for (const auto& [name, threads] : runs) {
    if (!pipeline(root / name, threads)) return {false, "pipeline run " + name + " failed"};
  }
  std::string detail;
  bool pass = true;
  for (const char* file : {"model.bin", "report.txt", "pred.tsv", "history.csv"}) {
    const std::string a = read_file((root / "a" / file).string());
    for (const char* other : {"b", "c"}) {
      if (read_file((root / other / file).string()) != a) {
        pass = false;
        detail += std::string(file) + " differs in run " + other + "; ";
      }
    }
  }
  std::filesystem::remove_all(root);
  if (pass) detail = "model, predictions, history and report byte-identical across 3 runs (1 and 2 threads)";
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"CRF oracle equivalence", crf_oracle},
      {"gradient suite", gradient_suite},
      {"worked examples", worked_examples},
      {"attention properties", attention_properties},
      {"in-vocabulary learning", in_vocabulary_learning},
      {"OOV benefit of contexts", oov_benefit},
      {"document-count trend", document_trend},
      {"UNS oracle", uns_oracle},
      {"pipeline determinism", determinism},
  };
  std::set<std::size_t> selected;
  for (int k = 1; k < argc; ++k) selected.insert(std::strtoul(argv[k], nullptr, 10));

  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (!selected.empty() && !selected.contains(k + 1)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
