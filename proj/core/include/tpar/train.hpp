#pragma once

// Mini-batch training: each query's frontier is built from the background
// fact set (bounded by t_q in extrapolation), losses are summed over a batch
// in a fixed order, and Adam takes one step per batch. Validation MRR drives
// early stopping; the best parameters are kept.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "tpar/evaluator.hpp"
#include "tpar/frontier.hpp"
#include "tpar/grad.hpp"
#include "tpar/model.hpp"
#include "tpar/store.hpp"

namespace tpar {

struct TrainConfig {
  Regime regime = Regime::interpolation;
  int dim = 128;
  int attn_dim = 5;
  int max_length = 5;
  Activation activation = Activation::identity;
  bool shared_relations = false;
  bool scalar_time = false;

  double lr = 3e-4;
  int batch_size = 10;
  double dropout = 0.2;
  int epochs = 50;
  int patience = 10;   // validations without improvement before stopping
  int eval_every = 1;  // epochs between validations; 0 disables validation

  std::uint64_t seed = 0;        // parameter init, shuffling and dropout
  std::uint64_t split_seed = 0;  // fact/query partition of train
  double fact_fraction = 0.75;
  // Restrict training queries (and validation) to these base relations.
  std::vector<RelationId> query_relations;
  std::size_t valid_limit = 0;

  bool self_loops = true;
  int degree_cap = 0;
  ChronologicalOrder order = ChronologicalOrder::relaxed;
  int workers = 1;

  // Throws ConfigError naming the offending field.
  void validate() const;
  FrontierOptions frontier(const Vocab& vocab) const;
  ModelDims model_dims(const Vocab& vocab) const;
};

struct TrainingQuery {
  Query query;
  EntityId gold = 0;
};

// Background graph and queries derived from the train split.
struct TrainingSetup {
  TrainPartition partition;
  TemporalGraph background;
  std::vector<TrainingQuery> queries;  // both directions of every query fact
};

TrainingSetup prepare_training(const Dataset& data, const TrainConfig& config);

struct EpochRecord {
  int epoch = 0;
  std::size_t batches = 0;
  double loss = 0.0;  // mean per query
  std::optional<double> valid_mrr;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> log;
  int best_epoch = 0;  // 0 = initialization
  std::optional<double> best_valid_mrr;
  bool stopped_early = false;
};

// Summed loss and gradients for a batch of queries (gradients not averaged).
double batch_gradients(const ModelParams& params, const TemporalGraph& background,
                       std::span<const TrainingQuery> batch, const FrontierOptions& frontier, double dropout,
                       std::uint64_t seed, int workers, ModelParams& grads);

// Never touches data.test. Writes one JSON line per epoch to `log` if given.
TrainResult train(const Dataset& data, const TrainConfig& config, std::ostream* log = nullptr);

// Validation or training-query evaluation helpers.
TemporalGraph evaluation_background(const Dataset& data, Regime regime, bool include_test);
FilterIndex evaluation_filter(const Dataset& data, bool include_test);
// Ranks training queries against the training background.
EvalResult evaluate_training_queries(const ModelParams& params, const TrainingSetup& setup, const Dataset& data,
                                     const TrainConfig& config);

TimeIndex time_span(const Dataset& data);

}  // namespace tpar
