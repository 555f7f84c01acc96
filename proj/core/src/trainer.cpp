#include "qseg/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <thread>

#include "qseg/errors.hpp"
#include "qseg/evaluation.hpp"
#include "qseg/random.hpp"

namespace qseg {

void TrainConfig::validate() const {
  if (!(lr > 0)) throw Error("lr must be positive");
  if (batch_size < 1) throw Error("batch_size must be at least 1");
  if (!(val_fraction > 0 && val_fraction < 1)) throw Error("val_fraction must be in (0, 1)");
  if (max_epochs < 1) throw Error("max_epochs must be at least 1");
  if (context_cap < 1) throw Error("context_cap must be at least 1");
  if (window < 1) throw Error("window must be at least 1");
  if (max_distance < 1) throw Error("max_distance must be at least 1");
  if (char_dim < 1 || hidden_dim < 1 || distance_dim < 1 || feature_dim < 1) {
    throw Error("model dimensions must be positive");
  }
  if (threads < 1) throw Error("threads must be at least 1");
}

std::string TrainConfig::to_kv() const {
  char buf[64];
  std::string out;
  const auto put = [&](const char* key, const std::string& v) { out += std::string(key) + "=" + v + "\n"; };
  std::snprintf(buf, sizeof buf, "%.17g", lr);
  put("lr", buf);
  put("batch_size", std::to_string(batch_size));
  std::snprintf(buf, sizeof buf, "%.17g", val_fraction);
  put("val_fraction", buf);
  put("patience", std::to_string(patience));
  put("max_epochs", std::to_string(max_epochs));
  put("seed", std::to_string(seed));
  put("context_cap", std::to_string(context_cap));
  put("window", std::to_string(window));
  put("max_distance", std::to_string(max_distance));
  put("variant", std::string(variant_name(variant)));
  put("char_dim", std::to_string(char_dim));
  put("hidden_dim", std::to_string(hidden_dim));
  put("distance_dim", std::to_string(distance_dim));
  put("feature_dim", std::to_string(feature_dim));
  put("exclude_self", exclude_self ? "1" : "0");
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw Error("bad value for " + std::string(key) + ": '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw Error("bad value for " + std::string(key) + ": '" + std::string(v) + "'");
}

}  // namespace

void apply_config_entry(std::string_view key, std::string_view value, TrainConfig& c) {
  key = trim(key);
  value = trim(value);
  if (key == "lr") c.lr = parse_number<double>(key, value);
  else if (key == "batch_size") c.batch_size = parse_number<std::size_t>(key, value);
  else if (key == "val_fraction") c.val_fraction = parse_number<double>(key, value);
  else if (key == "patience") c.patience = parse_number<std::size_t>(key, value);
  else if (key == "max_epochs") c.max_epochs = parse_number<std::size_t>(key, value);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "context_cap") c.context_cap = parse_number<std::size_t>(key, value);
  else if (key == "window") c.window = parse_number<std::size_t>(key, value);
  else if (key == "max_distance") c.max_distance = parse_number<std::size_t>(key, value);
  else if (key == "variant") c.variant = parse_variant(value);
  else if (key == "char_dim") c.char_dim = parse_number<std::size_t>(key, value);
  else if (key == "hidden_dim") c.hidden_dim = parse_number<std::size_t>(key, value);
  else if (key == "distance_dim") c.distance_dim = parse_number<std::size_t>(key, value);
  else if (key == "feature_dim") c.feature_dim = parse_number<std::size_t>(key, value);
  else if (key == "exclude_self") c.exclude_self = parse_bool(key, value);
  else if (key == "threads") c.threads = parse_number<std::size_t>(key, value);
  else throw Error("unknown config key '" + std::string(key) + "'");
}

void apply_config_text(std::string_view text, TrainConfig& config) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const std::size_t nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected key=value");
    apply_config_entry(line.substr(0, eq), line.substr(eq + 1), config);
  }
}

std::pair<std::vector<LabeledQuery>, std::vector<LabeledQuery>> split_train_val(
    std::span<const LabeledQuery> dataset, double val_fraction, std::uint64_t seed) {
  if (dataset.empty()) throw EmptyDataset("cannot split an empty dataset");
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(mix_seed(seed, 0x5b1177));
  shuffle(std::span<std::size_t>(order), rng);

  auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(dataset.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, dataset.size());

  std::pair<std::vector<LabeledQuery>, std::vector<LabeledQuery>> out;
  for (std::size_t k = 0; k < order.size(); ++k) {
    (k < n_val ? out.second : out.first).push_back(dataset[order[k]]);
  }
  return out;
}

SearchOptions query_search_options(const SearchOptions& base, const Query& q) {
  SearchOptions s = base;
  s.seed = mix_seed(base.seed, fnv1a(q.utf8()));
  return s;
}

std::vector<EncodedBag> encode_feature_bags(const Query& q, const BigramIndex& index,
                                            const SearchOptions& search,
                                            const FeatureOptions& features,
                                            const Vocabulary& vocab) {
  std::vector<EncodedBag> out;
  out.reserve(q.size());
  for (const FeatureBag& bag :
       build_feature_bags(q, index, query_search_options(search, q), features)) {
    out.push_back(encode_bag(bag, vocab));
  }
  return out;
}

Example make_example(const Query& q, const BigramIndex& index, const SavedModel& model) {
  Example ex;
  ex.ids = model.vocab.encode(q.chars());
  if (model.config.variant != Variant::kQ) {
    const FeatureOptions features{model.config.window,
                                  static_cast<std::uint32_t>(model.config.max_distance)};
    ex.bags = encode_feature_bags(q, index, model.search, features, model.vocab);
  }
  return ex;
}

namespace {

std::vector<ad::Tensor*> tensors_of(ModelParams& p) {
  std::vector<ad::Tensor*> out;
  p.for_each([&](std::string_view, ad::Tensor& t) { out.push_back(&t); });
  return out;
}

}  // namespace

Adam::Adam(const ModelParams& like, double lr, double beta1, double beta2, double epsilon)
    : lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon),
      m_(ModelParams::zeros_like(like)), v_(ModelParams::zeros_like(like)) {}

void Adam::step(ModelParams& params, const ModelParams& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto p = tensors_of(params);
  auto g = tensors_of(const_cast<ModelParams&>(grads));
  auto m = tensors_of(m_);
  auto v = tensors_of(v_);
  for (std::size_t k = 0; k < p.size(); ++k) {
    double* pk = p[k]->data();
    const double* gk = g[k]->data();
    double* mk = m[k]->data();
    double* vk = v[k]->data();
    for (std::size_t i = 0; i < p[k]->size(); ++i) {
      mk[i] = beta1_ * mk[i] + (1.0 - beta1_) * gk[i];
      vk[i] = beta2_ * vk[i] + (1.0 - beta2_) * gk[i] * gk[i];
      pk[i] -= lr_ * (mk[i] / c1) / (std::sqrt(vk[i] / c2) + epsilon_);
    }
  }
}

double batch_loss_and_grad(const ModelParams& params, const ModelConfig& config,
                           std::span<const Example* const> batch, ModelParams& grads,
                           std::size_t threads) {
  const std::size_t n = batch.size();
  std::vector<ModelParams> per_example(n, ModelParams::zeros_like(params));
  std::vector<double> losses(n, 0.0);

  const auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t k = begin; k < n; k += stride) {
      ad::Tape tape;
      const BoundParams bound = bind(tape, params, &per_example[k]);
      const ad::Var loss = example_loss(tape, bound, config, *batch[k]);
      losses[k] = tape.scalar(loss);
      tape.backward(loss);
    }
  };
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  }

  grads = ModelParams::zeros_like(params);
  auto total = tensors_of(grads);
  double loss = 0.0;
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    loss += losses[k];
    auto ex = tensors_of(per_example[k]);
    for (std::size_t j = 0; j < total.size(); ++j) {
      double* dst = total[j]->data();
      const double* src = ex[j]->data();
      for (std::size_t i = 0; i < total[j]->size(); ++i) dst[i] += src[i];
    }
  }
  for (ad::Tensor* t : total) {
    for (double& x : t->values()) x *= inv;
  }
  return loss * inv;
}

double mean_loss(const ModelParams& params, const ModelConfig& config,
                 std::span<const Example> examples) {
  double total = 0.0;
  for (const Example& ex : examples) {
    ad::Tape tape;
    const BoundParams bound = bind(tape, params);
    total += tape.scalar(example_loss(tape, bound, config, ex));
  }
  return examples.empty() ? 0.0 : total / static_cast<double>(examples.size());
}

TrainResult train(std::span<const LabeledQuery> dataset, const BigramIndex& index,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  auto [train_set, val_set] = split_train_val(dataset, config.val_fraction, config.seed);

  std::vector<Query> train_queries;
  train_queries.reserve(train_set.size());
  for (const LabeledQuery& lq : train_set) train_queries.push_back(lq.query);

  TrainResult result;
  result.train_size = train_set.size();
  result.val_size = val_set.size();
  SavedModel& model = result.model;
  model.vocab = Vocabulary::build(train_queries, index.docs());
  model.config.vocab_size = model.vocab.size();
  model.config.char_dim = config.char_dim;
  model.config.hidden_dim = config.hidden_dim;
  model.config.distance_dim = config.distance_dim;
  model.config.feature_dim = config.feature_dim;
  model.config.window = config.window;
  model.config.max_distance = config.max_distance;
  model.config.variant = config.variant;
  model.search.cap = config.context_cap;
  model.search.seed = config.seed;
  model.search.exclude_self = config.exclude_self;

  const auto prepare = [&](const std::vector<LabeledQuery>& items) {
    std::vector<Example> out;
    out.reserve(items.size());
    for (const LabeledQuery& lq : items) {
      Example ex = make_example(lq.query, index, model);
      ex.labels = encode_labels(lq.gold);
      out.push_back(std::move(ex));
    }
    return out;
  };
  const std::vector<Example> train_examples = prepare(train_set);
  const std::vector<Example> val_examples = prepare(val_set);
  std::vector<Segmentation> val_gold;
  val_gold.reserve(val_set.size());
  for (const LabeledQuery& lq : val_set) val_gold.push_back(lq.gold);

  ModelParams params = ModelParams::init(model.config, mix_seed(config.seed, 0x1417));
  ModelParams grads = ModelParams::zeros_like(params);
  Adam adam(params, config.lr, config.beta1, config.beta2, config.epsilon);
  model.params = params;
  result.best_val_f1 = -1.0;

  std::vector<std::size_t> order(train_examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng shuffle_rng(mix_seed(config.seed, 0x5fu));
  std::size_t stale = 0;
  std::vector<const Example*> batch;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      batch.clear();
      for (std::size_t k = start; k < std::min(order.size(), start + config.batch_size); ++k) {
        batch.push_back(&train_examples[order[k]]);
      }
      const double loss = batch_loss_and_grad(params, model.config, batch, grads, config.threads);
      if (!std::isfinite(loss)) {
        throw NonFiniteLoss("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batches + 1));
      }
      adam.step(params, grads);
      loss_sum += loss;
      ++batches;
    }

    std::vector<Segmentation> val_pred;
    val_pred.reserve(val_examples.size());
    for (std::size_t k = 0; k < val_examples.size(); ++k) {
      val_pred.push_back(decode_labels(val_set[k].query,
                                       predict_labels(params, model.config, val_examples[k])));
    }
    const EpochRecord record{epoch, batches ? loss_sum / static_cast<double>(batches) : 0.0,
                             segment_prf(val_pred, val_gold).f1};
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);

    if (record.val_f1 > result.best_val_f1) {
      result.best_val_f1 = record.val_f1;
      result.best_epoch = epoch;
      model.params = params;
      stale = 0;
    } else if (++stale >= std::max<std::size_t>(config.patience, 1)) {
      break;
    }
  }
  return result;
}

std::string format_history_csv(std::span<const EpochRecord> history) {
  std::string out = "epoch,loss,val_f1\n";
  char buf[96];
  for (const EpochRecord& r : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.9f,%.6f\n", r.epoch, r.train_loss, r.val_f1);
    out += buf;
  }
  return out;
}

std::vector<Segmentation> segment_queries(std::span<const Query> queries, const BigramIndex& index,
                                          const SavedModel& model) {
  std::vector<Segmentation> out;
  out.reserve(queries.size());
  for (const Query& q : queries) {
    const Example ex = make_example(q, index, model);
    out.push_back(decode_labels(q, predict_labels(model.params, model.config, ex)));
  }
  return out;
}

}  // namespace qseg
