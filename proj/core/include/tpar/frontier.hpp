#pragma once

// Per-query temporal path collection. Step l holds every temporal link whose
// source was a destination of step l-1 (step 0 is the query entity), filtered
// by the regime's time rule.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "tpar/store.hpp"
#include "tpar/types.hpp"

namespace tpar {

struct Query {
  EntityId entity = 0;      // e_q
  RelationId relation = 0;  // r_q
  TimeIndex time = 0;       // t_q
  Regime regime = Regime::interpolation;
  std::optional<EntityId> gold;

  // Strict time bound on usable links: t_q in extrapolation, none otherwise.
  std::optional<TimeIndex> time_bound() const {
    return regime == Regime::extrapolation ? std::optional<TimeIndex>(time) : std::nullopt;
  }

  friend bool operator==(const Query&, const Query&) = default;
};

struct Edge {
  EntityId src = 0;
  RelationId relation = 0;
  EntityId dst = 0;
  TimeIndex time = 0;
  // Self-loop carrying the reserved IDENTITY relation; its time is t_q.
  bool identity = false;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

enum class ChronologicalOrder {
  relaxed,  // only t_i < t_q (extrapolation)
  strict,   // additionally t_1 >= t_2 >= ... along each path
};

struct FrontierOptions {
  int max_length = 5;
  bool self_loops = true;
  // Per-source cap on sampled links; 0 disables sampling.
  int degree_cap = 0;
  ChronologicalOrder order = ChronologicalOrder::relaxed;
  std::uint64_t seed = 0;
  // Relation id used for IDENTITY links (Vocab::identity_relation()).
  RelationId identity_relation = -1;
};

struct FrontierStep {
  std::vector<Edge> edges;           // canonical order: by src, then (time, relation, dst)
  std::vector<EntityId> destinations;  // sorted unique D(P_l)
  std::vector<EntityId> visited;       // sorted E^l
};

struct FrontierTrace {
  Query query;
  std::vector<FrontierStep> steps;

  std::size_t num_steps() const noexcept { return steps.size(); }
  const std::vector<EntityId>& visited() const;  // E^L, or {e_q} when there are no steps
  std::size_t num_edges() const;
};

// All admissible links out of `active` for one step. Not subject to the
// chronological-order rule (see collect), which needs per-path state.
std::vector<Edge> expand_step(const TemporalGraph& graph, std::span<const EntityId> active,
                              const Query& query, int degree_cap, std::uint64_t seed,
                              int step_index = 1);

FrontierTrace collect(const TemporalGraph& graph, const Query& query, const FrontierOptions& options);

// One step per line: "<step>\t<src>\t<relation>\t<dst>\t<time>\t<identity 0/1>".
void write_trace(std::ostream& out, const FrontierTrace& trace);

using TemporalPath = std::vector<Edge>;

struct EnumerateOptions {
  ChronologicalOrder order = ChronologicalOrder::relaxed;
  bool self_loops = false;
  RelationId identity_relation = -1;
  std::int32_t max_entities = 12;
};

// Exhaustive enumeration of every length-L temporal path from e_q. Exponential;
// refuses graphs with more than `max_entities` entities.
std::vector<TemporalPath> enumerate_paths(const TemporalGraph& graph, const Query& query, int length,
                                          const EnumerateOptions& options = {});

}  // namespace tpar
