#pragma once

// Link-prediction evaluation under the time-wise filtered protocol: each test
// fact yields an object-side query (s, r, ?, t) and a subject-side query
// realized as (o, r^-1, ?, t); other true answers at the same timestamp are
// removed before ranking the gold entity.

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tpar/frontier.hpp"
#include "tpar/model.hpp"
#include "tpar/store.hpp"

namespace tpar {

struct Metrics {
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
  std::size_t count = 0;
};

Metrics metrics_from_ranks(std::span<const std::int64_t> ranks);

// (subject, relation, time) -> true objects, over facts and their inverses.
class FilterIndex {
 public:
  FilterIndex() = default;
  static FilterIndex build(std::span<const std::span<const Quadruple>> parts, const Vocab& vocab);

  // Sorted true answers at exactly time t.
  std::span<const EntityId> answers(EntityId subject, RelationId relation, TimeIndex time) const;
  // Sorted true answers at any time (time-unwise / raw filter).
  std::span<const EntityId> answers_any_time(EntityId subject, RelationId relation) const;
  bool contains(const Quadruple& fact) const;

 private:
  struct Key {
    EntityId subject;
    RelationId relation;
    TimeIndex time;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      return QuadrupleHash{}(Quadruple{k.subject, k.relation, 0, k.time});
    }
  };
  static constexpr TimeIndex kAnyTime = -1;
  std::unordered_map<Key, std::vector<EntityId>, KeyHash> timed_;
  std::unordered_map<Key, std::vector<EntityId>, KeyHash> untimed_;
};

struct RankingTask {
  Query query;
  EntityId gold = 0;
  bool subject_side = false;
};

std::array<RankingTask, 2> candidates(const Quadruple& fact, const Vocab& vocab, Regime regime);

// rank = 1 + #(score > gold) + floor(#(score == gold) / 2), counting the gold
// itself among the ties, over entities not in `filtered` (gold is never
// filtered). This is the mean rank among ties rounded half up.
std::int64_t filtered_rank(std::span<const double> scores, EntityId gold, std::span<const EntityId> filtered);

struct EvalOptions {
  Regime regime = Regime::interpolation;
  FrontierOptions frontier;
  bool time_unwise_filter = false;  // debug only; the CLI guards it
  int workers = 1;
  // When non-empty, only facts with these base relations are ranked.
  std::vector<RelationId> query_relations;
  // Rank at most this many facts (0 = all), taken in split order.
  std::size_t limit = 0;
};

struct RankRecord {
  Quadruple fact;
  bool subject_side = false;
  EntityId gold = 0;
  EntityId top = 0;  // highest-scoring candidate, lowest id on ties
  std::int64_t rank = 0;
};

struct EvalResult {
  Metrics metrics;
  std::vector<RankRecord> ranks;
  // Largest non-identity link time seen across traces in extrapolation; must
  // stay below every query's time (checked per query).
  std::size_t traces_checked = 0;
};

using Scorer = std::function<std::vector<double>(const RankingTask&)>;

// Ranks both directions of every fact with an arbitrary scorer.
EvalResult evaluate_with(std::span<const Quadruple> split, const FilterIndex& filter, const Vocab& vocab,
                         const EvalOptions& options, const Scorer& scorer);

// Model evaluation. In extrapolation, throws std::logic_error if any trace
// uses a fact with time >= t_q.
EvalResult evaluate(const ModelParams& params, const TemporalGraph& graph, std::span<const Quadruple> split,
                    const FilterIndex& filter, const Vocab& vocab, const EvalOptions& options);

// Scores every entity for one query with the model.
std::vector<double> model_scores(const ModelParams& params, const TemporalGraph& graph, const Query& query,
                                 const FrontierOptions& frontier);

void write_metrics_record(std::ostream& out, const Metrics& m, std::string_view label);
void write_metrics_table(std::ostream& out, const Metrics& m, std::string_view label);
// TSV: subject relation object time side gold top rank.
void write_rank_dump(std::ostream& out, std::span<const RankRecord> ranks, const Vocab& vocab);

}  // namespace tpar
