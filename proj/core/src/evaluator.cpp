#include "tpar/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "tpar/encoder.hpp"
#include "tpar/errors.hpp"
#include "tpar/grad.hpp"
#include "tpar/parallel.hpp"

namespace tpar {

Metrics metrics_from_ranks(std::span<const std::int64_t> ranks) {
  Metrics m;
  m.count = ranks.size();
  if (ranks.empty()) return m;
  double rr = 0.0;
  std::size_t h1 = 0, h3 = 0, h10 = 0;
  for (auto r : ranks) {
    if (r < 1) throw Error("metrics: rank below 1");
    rr += 1.0 / static_cast<double>(r);
    h1 += r <= 1;
    h3 += r <= 3;
    h10 += r <= 10;
  }
  const auto n = static_cast<double>(ranks.size());
  m.mrr = rr / n;
  m.hits1 = static_cast<double>(h1) / n;
  m.hits3 = static_cast<double>(h3) / n;
  m.hits10 = static_cast<double>(h10) / n;
  return m;
}

FilterIndex FilterIndex::build(std::span<const std::span<const Quadruple>> parts, const Vocab& vocab) {
  FilterIndex index;
  const auto base = vocab.num_base_relations();
  auto add = [&](EntityId s, RelationId r, EntityId o, TimeIndex t) {
    index.timed_[Key{s, r, t}].push_back(o);
    index.untimed_[Key{s, r, kAnyTime}].push_back(o);
  };
  for (const auto& part : parts) {
    for (const auto& q : part) {
      if (q.relation < 0 || q.relation >= base) throw VocabError("filter index expects base relations only");
      add(q.subject, q.relation, q.object, q.time);
      add(q.object, vocab.inverse(q.relation), q.subject, q.time);
    }
  }
  for (auto* map : {&index.timed_, &index.untimed_}) {
    for (auto& [key, objects] : *map) {
      std::sort(objects.begin(), objects.end());
      objects.erase(std::unique(objects.begin(), objects.end()), objects.end());
    }
  }
  return index;
}

std::span<const EntityId> FilterIndex::answers(EntityId subject, RelationId relation, TimeIndex time) const {
  const auto it = timed_.find(Key{subject, relation, time});
  if (it == timed_.end()) return {};
  return it->second;
}

std::span<const EntityId> FilterIndex::answers_any_time(EntityId subject, RelationId relation) const {
  const auto it = untimed_.find(Key{subject, relation, kAnyTime});
  if (it == untimed_.end()) return {};
  return it->second;
}

bool FilterIndex::contains(const Quadruple& fact) const {
  const auto objects = answers(fact.subject, fact.relation, fact.time);
  return std::binary_search(objects.begin(), objects.end(), fact.object);
}

std::array<RankingTask, 2> candidates(const Quadruple& fact, const Vocab& vocab, Regime regime) {
  RankingTask object_side;
  object_side.query = Query{fact.subject, fact.relation, fact.time, regime, fact.object};
  object_side.gold = fact.object;
  RankingTask subject_side;
  subject_side.query = Query{fact.object, vocab.inverse(fact.relation), fact.time, regime, fact.subject};
  subject_side.gold = fact.subject;
  subject_side.subject_side = true;
  return {object_side, subject_side};
}

std::int64_t filtered_rank(std::span<const double> scores, EntityId gold, std::span<const EntityId> filtered) {
  if (gold < 0 || static_cast<std::size_t>(gold) >= scores.size()) throw Error("filtered_rank: gold outside scores");
  const double g = scores[static_cast<std::size_t>(gold)];
  std::int64_t greater = 0;
  std::int64_t equal = 0;
  for (double s : scores) {
    greater += s > g;
    equal += s == g;
  }
  // Remove other true answers; filtered may be unsorted or repeat.
  std::vector<EntityId> removed(filtered.begin(), filtered.end());
  std::sort(removed.begin(), removed.end());
  removed.erase(std::unique(removed.begin(), removed.end()), removed.end());
  for (EntityId e : removed) {
    if (e == gold || e < 0 || static_cast<std::size_t>(e) >= scores.size()) continue;
    const double s = scores[static_cast<std::size_t>(e)];
    greater -= s > g;
    equal -= s == g;
  }
  return 1 + greater + equal / 2;
}

EvalResult evaluate_with(std::span<const Quadruple> split, const FilterIndex& filter, const Vocab& vocab,
                         const EvalOptions& options, const Scorer& scorer) {
  std::vector<Quadruple> facts;
  for (const auto& q : split) {
    if (!options.query_relations.empty() &&
        std::find(options.query_relations.begin(), options.query_relations.end(), q.relation) ==
            options.query_relations.end()) {
      continue;
    }
    facts.push_back(q);
    if (options.limit && facts.size() >= options.limit) break;
  }
  if (facts.empty()) throw InputError("evaluate: empty split");

  std::vector<RankRecord> records(2 * facts.size());
  parallel_for(records.size(), options.workers, [&](std::size_t i) {
    const auto& fact = facts[i / 2];
    const auto task = candidates(fact, vocab, options.regime)[i % 2];
    const auto scores = scorer(task);
    if (scores.size() != static_cast<std::size_t>(vocab.num_entities())) {
      throw ShapeError("evaluate: scorer returned a score vector of the wrong size");
    }
    const auto filtered = options.time_unwise_filter
                              ? filter.answers_any_time(task.query.entity, task.query.relation)
                              : filter.answers(task.query.entity, task.query.relation, task.query.time);
    auto& rec = records[i];
    rec.fact = fact;
    rec.subject_side = task.subject_side;
    rec.gold = task.gold;
    rec.top = static_cast<EntityId>(std::max_element(scores.begin(), scores.end()) - scores.begin());
    rec.rank = filtered_rank(scores, task.gold, filtered);
  });

  EvalResult result;
  std::vector<std::int64_t> ranks;
  ranks.reserve(records.size());
  for (const auto& r : records) ranks.push_back(r.rank);
  result.metrics = metrics_from_ranks(ranks);
  result.ranks = std::move(records);
  return result;
}

std::vector<double> model_scores(const ModelParams& params, const TemporalGraph& graph, const Query& query,
                                 const FrontierOptions& frontier) {
  const auto trace = collect(graph, query, frontier);
  if (const auto bound = query.time_bound()) {
    for (const auto& step : trace.steps) {
      for (const auto& e : step.edges) {
        if (!e.identity && e.time >= *bound) {
          throw std::logic_error("extrapolation trace used a fact at time " + std::to_string(e.time) +
                                 " for a query at time " + std::to_string(*bound));
        }
      }
    }
  }
  const auto state = encode_query(params, query, trace);
  return score_all(params, state, params.dims.num_entities);
}

EvalResult evaluate(const ModelParams& params, const TemporalGraph& graph, std::span<const Quadruple> split,
                    const FilterIndex& filter, const Vocab& vocab, const EvalOptions& options) {
  if (params.dims.num_entities != vocab.num_entities() ||
      params.dims.num_base_relations != vocab.num_base_relations()) {
    throw CheckpointError("model dims do not match the dataset vocabulary");
  }
  auto frontier = options.frontier;
  frontier.max_length = params.dims.max_length;
  frontier.identity_relation = vocab.identity_relation();
  auto result = evaluate_with(split, filter, vocab, options, [&](const RankingTask& task) {
    return model_scores(params, graph, task.query, frontier);
  });
  result.traces_checked = result.ranks.size();
  return result;
}

void write_metrics_record(std::ostream& out, const Metrics& m, std::string_view label) {
  nlohmann::ordered_json j;
  j["label"] = label;
  j["count"] = m.count;
  j["mrr"] = m.mrr;
  j["hits1"] = m.hits1;
  j["hits3"] = m.hits3;
  j["hits10"] = m.hits10;
  out << j.dump() << '\n';
}

void write_metrics_table(std::ostream& out, const Metrics& m, std::string_view label) {
  const auto flags = out.flags();
  out << label << " (" << m.count << " ranked predictions)\n";
  out << std::fixed << std::setprecision(4);
  out << "  MRR      " << m.mrr << '\n';
  out << "  Hits@1   " << m.hits1 << '\n';
  out << "  Hits@3   " << m.hits3 << '\n';
  out << "  Hits@10  " << m.hits10 << '\n';
  out.flags(flags);
}

void write_rank_dump(std::ostream& out, std::span<const RankRecord> ranks, const Vocab& vocab) {
  out << "subject\trelation\tobject\ttime\tside\tgold\ttop\trank\n";
  for (const auto& r : ranks) {
    out << vocab.entity_name(r.fact.subject) << '\t' << vocab.relation_name(r.fact.relation) << '\t'
        << vocab.entity_name(r.fact.object) << '\t' << vocab.format_time(r.fact.time) << '\t'
        << (r.subject_side ? "subject" : "object") << '\t' << vocab.entity_name(r.gold) << '\t'
        << vocab.entity_name(r.top) << '\t' << r.rank << '\n';
  }
}

}  // namespace tpar
