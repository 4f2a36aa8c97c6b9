#include "tpar/frontier.hpp"

#include <algorithm>
#include <limits>
#include <ostream>
#include <unordered_map>

#include "tpar/errors.hpp"
#include "tpar/rng.hpp"

namespace tpar {

const std::vector<EntityId>& FrontierTrace::visited() const {
  static const std::vector<EntityId> empty;
  if (steps.empty()) return empty;
  return steps.back().visited;
}

std::size_t FrontierTrace::num_edges() const {
  std::size_t n = 0;
  for (const auto& s : steps) n += s.edges.size();
  return n;
}

namespace {

constexpr TimeIndex kNoLimit = std::numeric_limits<TimeIndex>::max();

// Links out of one source, after the regime bound, the optional
// chronological limit (time <= latest) and the optional degree cap.
void expand_source(const TemporalGraph& graph, EntityId src, const Query& query, int degree_cap,
                   std::uint64_t seed, int step_index, TimeIndex latest, std::vector<Edge>& out) {
  const auto links = graph.neighbors(src, query.time_bound());
  std::vector<const Link*> admissible;
  admissible.reserve(links.size());
  for (const auto& l : links) {
    if (l.time <= latest) admissible.push_back(&l);
  }
  if (degree_cap > 0 && admissible.size() > static_cast<std::size_t>(degree_cap)) {
    Rng rng(mix_seeds(seed, static_cast<std::uint64_t>(query.entity), static_cast<std::uint64_t>(query.relation),
                      static_cast<std::uint64_t>(query.time), static_cast<std::uint64_t>(step_index),
                      static_cast<std::uint64_t>(src)));
    // Partial Fisher-Yates, then restore canonical order among the survivors.
    for (std::size_t i = 0; i < static_cast<std::size_t>(degree_cap); ++i) {
      const auto j = i + static_cast<std::size_t>(rng.bounded(admissible.size() - i));
      std::swap(admissible[i], admissible[j]);
    }
    admissible.resize(static_cast<std::size_t>(degree_cap));
    std::sort(admissible.begin(), admissible.end());
  }
  for (const Link* l : admissible) out.push_back({src, l->relation, l->object, l->time, false});
}

std::vector<EntityId> sorted_unique(std::vector<EntityId> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

std::vector<Edge> expand_step(const TemporalGraph& graph, std::span<const EntityId> active, const Query& query,
                              int degree_cap, std::uint64_t seed, int step_index) {
  std::vector<Edge> out;
  for (EntityId src : active) expand_source(graph, src, query, degree_cap, seed, step_index, kNoLimit, out);
  return out;
}

FrontierTrace collect(const TemporalGraph& graph, const Query& query, const FrontierOptions& options) {
  if (options.max_length < 1) throw ConfigError("max_length", "must be at least 1");
  if (options.self_loops && options.identity_relation < 0) {
    throw ConfigError("self_loops", "identity relation id not set");
  }
  FrontierTrace trace;
  trace.query = query;
  trace.steps.resize(static_cast<std::size_t>(options.max_length));
  if (query.entity < 0 || query.entity >= graph.num_entities()) return trace;

  const bool strict = options.order == ChronologicalOrder::strict;
  std::vector<EntityId> active{query.entity};
  std::vector<EntityId> visited{query.entity};
  // Strict mode: latest admissible time of the last link on some valid path
  // ending at each active entity.
  std::unordered_map<EntityId, TimeIndex> latest{{query.entity, kNoLimit}};

  for (int l = 1; l <= options.max_length; ++l) {
    auto& step = trace.steps[static_cast<std::size_t>(l - 1)];
    for (EntityId src : active) {
      const TimeIndex limit = strict ? latest.at(src) : kNoLimit;
      expand_source(graph, src, query, options.degree_cap, options.seed, l, limit, step.edges);
    }
    if (options.self_loops) {
      for (EntityId v : visited) {
        step.edges.push_back({v, options.identity_relation, v, query.time, true});
      }
    }
    std::vector<EntityId> dests;
    dests.reserve(step.edges.size());
    std::unordered_map<EntityId, TimeIndex> next_latest;
    for (const auto& e : step.edges) {
      dests.push_back(e.dst);
      if (strict) {
        const TimeIndex t = e.identity ? latest.at(e.src) : e.time;
        auto [it, inserted] = next_latest.try_emplace(e.dst, t);
        if (!inserted) it->second = std::max(it->second, t);
      }
    }
    step.destinations = sorted_unique(std::move(dests));
    std::vector<EntityId> merged;
    std::set_union(visited.begin(), visited.end(), step.destinations.begin(), step.destinations.end(),
                   std::back_inserter(merged));
    visited = std::move(merged);
    step.visited = visited;
    active = step.destinations;
    latest = std::move(next_latest);
  }
  return trace;
}

void write_trace(std::ostream& out, const FrontierTrace& trace) {
  out << "#tpar-trace v1\tquery\t" << trace.query.entity << '\t' << trace.query.relation << '\t'
      << trace.query.time << '\t' << to_string(trace.query.regime) << '\n';
  for (std::size_t s = 0; s < trace.steps.size(); ++s) {
    for (const auto& e : trace.steps[s].edges) {
      out << (s + 1) << '\t' << e.src << '\t' << e.relation << '\t' << e.dst << '\t' << e.time << '\t'
          << (e.identity ? 1 : 0) << '\n';
    }
  }
}

namespace {

void enumerate_from(const TemporalGraph& graph, const Query& query, const EnumerateOptions& options,
                    int remaining, EntityId at, TimeIndex latest, TemporalPath& prefix,
                    std::vector<TemporalPath>& out) {
  if (remaining == 0) {
    out.push_back(prefix);
    return;
  }
  const bool strict = options.order == ChronologicalOrder::strict;
  for (const auto& l : graph.neighbors(at, query.time_bound())) {
    if (strict && l.time > latest) continue;
    prefix.push_back({at, l.relation, l.object, l.time, false});
    enumerate_from(graph, query, options, remaining - 1, l.object, strict ? l.time : latest, prefix, out);
    prefix.pop_back();
  }
  if (options.self_loops) {
    prefix.push_back({at, options.identity_relation, at, query.time, true});
    enumerate_from(graph, query, options, remaining - 1, at, latest, prefix, out);
    prefix.pop_back();
  }
}

}  // namespace

std::vector<TemporalPath> enumerate_paths(const TemporalGraph& graph, const Query& query, int length,
                                          const EnumerateOptions& options) {
  if (graph.num_entities() > options.max_entities) {
    throw OracleGuardError("enumerate_paths: graph has " + std::to_string(graph.num_entities()) +
                           " entities, oracle limit is " + std::to_string(options.max_entities));
  }
  if (length < 1) throw ConfigError("length", "must be at least 1");
  std::vector<TemporalPath> out;
  if (query.entity < 0 || query.entity >= graph.num_entities()) return out;
  TemporalPath prefix;
  enumerate_from(graph, query, options, length, query.entity, kNoLimit, prefix, out);
  return out;
}

}  // namespace tpar
