#include "tpar/train.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <json.hpp>

#include "tpar/encoder.hpp"
#include "tpar/errors.hpp"
#include "tpar/parallel.hpp"
#include "tpar/rng.hpp"

namespace tpar {

void TrainConfig::validate() const {
  if (dim < 1 || dim > 4096) throw ConfigError("dim", "must lie in [1, 4096]");
  if (attn_dim < 1 || attn_dim > 1024) throw ConfigError("attn_dim", "must lie in [1, 1024]");
  if (max_length < 1 || max_length > 16) throw ConfigError("max_length", "must lie in [1, 16]");
  if (!(lr > 0.0) || !std::isfinite(lr) || lr > 1.0) throw ConfigError("lr", "must lie in (0, 1]");
  if (batch_size < 1) throw ConfigError("batch_size", "must be at least 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout", "must lie in [0, 1)");
  if (epochs < 0) throw ConfigError("epochs", "must be non-negative");
  if (patience < 1) throw ConfigError("patience", "must be at least 1");
  if (eval_every < 0) throw ConfigError("eval_every", "must be non-negative");
  if (!(fact_fraction > 0.0 && fact_fraction < 1.0)) throw ConfigError("fact_fraction", "must lie in (0, 1)");
  if (degree_cap < 0) throw ConfigError("degree_cap", "must be non-negative");
  if (workers < 0) throw ConfigError("workers", "must be non-negative (0 = hardware parallelism)");
}

FrontierOptions TrainConfig::frontier(const Vocab& vocab) const {
  FrontierOptions f;
  f.max_length = max_length;
  f.self_loops = self_loops;
  f.degree_cap = degree_cap;
  f.order = order;
  f.seed = mix_seeds(seed, 0xf70);
  f.identity_relation = vocab.identity_relation();
  return f;
}

ModelDims TrainConfig::model_dims(const Vocab& vocab) const {
  ModelDims d;
  d.num_entities = vocab.num_entities();
  d.num_base_relations = vocab.num_base_relations();
  d.dim = dim;
  d.attn_dim = attn_dim;
  d.max_length = max_length;
  d.activation = activation;
  d.shared_relations = shared_relations;
  d.scalar_time = scalar_time;
  return d;
}

TimeIndex time_span(const Dataset& data) {
  TimeIndex lo = 0, hi = 0;
  bool any = false;
  for (const auto* part : {&data.train, &data.valid, &data.test}) {
    for (const auto& q : *part) {
      lo = any ? std::min(lo, q.time) : q.time;
      hi = any ? std::max(hi, q.time) : q.time;
      any = true;
    }
  }
  return std::max<TimeIndex>(hi - lo + 1, 2);
}

TrainingSetup prepare_training(const Dataset& data, const TrainConfig& config) {
  if (data.train.empty()) throw InputError("training split is empty");
  TrainingSetup setup;
  setup.partition = split_train(data.train, config.fact_fraction, config.split_seed, config.query_relations);
  setup.background = TemporalGraph::build(setup.partition.facts, data.vocab);
  for (const auto& fact : setup.partition.queries) {
    for (const auto& task : candidates(fact, data.vocab, config.regime)) {
      setup.queries.push_back({task.query, task.gold});
    }
  }
  return setup;
}

double batch_gradients(const ModelParams& params, const TemporalGraph& background,
                       std::span<const TrainingQuery> batch, const FrontierOptions& frontier, double dropout,
                       std::uint64_t seed, int workers, ModelParams& grads) {
  std::vector<GradTape> tapes(batch.size());
  std::vector<double> losses(batch.size(), 0.0);
  parallel_for(batch.size(), workers, [&](std::size_t i) {
    const auto& q = batch[i];
    const auto trace = collect(background, q.query, frontier);
    EncodeOptions enc;
    enc.mode = dropout > 0.0 ? Mode::train : Mode::inference;
    enc.dropout = dropout;
    enc.seed = mix_seeds(seed, i);
    auto& tape = tapes[i];
    tape = make_tape(params);
    tape.state = encode_query(params, q.query, trace, enc);
    losses[i] = backward(params, tape, q.gold);
    tape.state.reset();
  });
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    grads.add_scaled(tapes[i].grads, 1.0);
    total += losses[i];
  }
  return total;
}

TemporalGraph evaluation_background(const Dataset& data, Regime regime, bool include_test) {
  if (regime == Regime::interpolation) return TemporalGraph::build(data.train, data.vocab);
  std::vector<Quadruple> facts = data.train;
  facts.insert(facts.end(), data.valid.begin(), data.valid.end());
  if (include_test) facts.insert(facts.end(), data.test.begin(), data.test.end());
  return TemporalGraph::build(facts, data.vocab);
}

FilterIndex evaluation_filter(const Dataset& data, bool include_test) {
  std::vector<std::span<const Quadruple>> parts{data.train, data.valid};
  if (include_test) parts.emplace_back(data.test);
  return FilterIndex::build(parts, data.vocab);
}

EvalResult evaluate_training_queries(const ModelParams& params, const TrainingSetup& setup, const Dataset& data,
                                     const TrainConfig& config) {
  const std::span<const Quadruple> train(data.train);
  const auto filter = FilterIndex::build(std::span<const std::span<const Quadruple>>(&train, 1), data.vocab);
  EvalOptions opts;
  opts.regime = config.regime;
  opts.frontier = config.frontier(data.vocab);
  opts.workers = config.workers;
  return evaluate(params, setup.background, setup.partition.queries, filter, data.vocab, opts);
}

TrainResult train(const Dataset& data, const TrainConfig& config, std::ostream* log) {
  config.validate();
  const auto& vocab = data.vocab;
  if (!vocab.frozen()) throw InputError("training needs a loaded dataset (vocabulary not frozen)");
  const auto setup = prepare_training(data, config);
  if (setup.queries.empty()) throw InputError("no training queries after the fact/query split");
  const auto frontier = config.frontier(vocab);

  TrainResult result;
  result.params = ModelParams::init(config.model_dims(vocab), config.seed, time_span(data));
  if (config.epochs == 0) return result;

  const bool validating = config.eval_every > 0 && !data.valid.empty();
  TemporalGraph valid_background;
  FilterIndex valid_filter;
  EvalOptions valid_opts;
  if (validating) {
    valid_background = evaluation_background(data, config.regime, false);
    valid_filter = evaluation_filter(data, false);
    valid_opts.regime = config.regime;
    valid_opts.frontier = frontier;
    valid_opts.workers = config.workers;
    valid_opts.query_relations = config.query_relations;
    valid_opts.limit = config.valid_limit;
  }

  ModelParams params = result.params;
  ModelParams best = params;
  ModelParams grads = ModelParams::zeros(params.dims);
  auto adam = AdamState::for_params(params, AdamConfig{config.lr});
  Rng shuffler(mix_seeds(config.seed, 0x5ec));
  std::vector<std::size_t> order(setup.queries.size());
  int stale = 0;
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffler.shuffle(order);
    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0;
    std::vector<TrainingQuery> chunk;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const auto end = std::min(order.size(), start + batch);
      chunk.clear();
      for (std::size_t i = start; i < end; ++i) chunk.push_back(setup.queries[order[i]]);
      grads.set_zero();
      const auto seed = mix_seeds(config.seed, static_cast<std::uint64_t>(epoch), rec.batches);
      loss_sum += batch_gradients(params, setup.background, chunk, frontier, config.dropout, seed, config.workers, grads);
      ModelParams averaged = ModelParams::zeros(params.dims);
      averaged.add_scaled(grads, 1.0 / static_cast<double>(chunk.size()));
      adam_step(params, averaged, adam);
      ++rec.batches;
    }
    rec.loss = loss_sum / static_cast<double>(order.size());
    if (!std::isfinite(rec.loss)) throw TrainingError("training loss became non-finite at epoch " + std::to_string(epoch));

    bool stop = false;
    if (validating && epoch % config.eval_every == 0) {
      const auto mrr = evaluate(params, valid_background, data.valid, valid_filter, vocab, valid_opts).metrics.mrr;
      rec.valid_mrr = mrr;
      if (!result.best_valid_mrr || mrr > *result.best_valid_mrr) {
        result.best_valid_mrr = mrr;
        result.best_epoch = epoch;
        best = params;
        stale = 0;
      } else if (++stale >= config.patience) {
        stop = true;
      }
    }
    if (log) {
      nlohmann::ordered_json j;
      j["epoch"] = rec.epoch;
      j["batches"] = rec.batches;
      j["loss"] = rec.loss;
      if (rec.valid_mrr) j["valid_mrr"] = *rec.valid_mrr;
      *log << j.dump() << '\n';
    }
    result.log.push_back(rec);
    if (stop) {
      result.stopped_early = true;
      break;
    }
  }
  if (validating && result.best_valid_mrr) {
    result.params = std::move(best);
  } else {
    result.params = std::move(params);
    result.best_epoch = result.log.empty() ? 0 : result.log.back().epoch;
  }
  return result;
}

}  // namespace tpar
