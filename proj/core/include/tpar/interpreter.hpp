#pragma once

// Path explanations for a single prediction. Each link of the trace gets a
// first-order importance for f(q, target); a path's importance is the sum of
// its links' importances, and the best paths ending at the target are
// extracted from the step-layered DAG.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

#include "tpar/encoder.hpp"
#include "tpar/frontier.hpp"
#include "tpar/grad.hpp"
#include "tpar/model.hpp"
#include "tpar/store.hpp"

namespace tpar {

enum class Attribution {
  logit,  // d f / d (attention logit) * alpha
  alpha,  // d f / d alpha * alpha
};

struct EdgeImportance {
  EntityId target = 0;
  std::vector<std::vector<double>> values;  // per step, per trace edge
  bool unreachable = false;                 // target has no h^L entry; values are all 0
};

// Requires tape.state to hold the forward pass for the query. tape.grads is
// left untouched.
EdgeImportance edge_importance(const ModelParams& params, const GradTape& tape, EntityId target,
                               Attribution mode = Attribution::logit);

struct PathExplanation {
  std::vector<Edge> path;  // one link per step, IDENTITY links included
  std::vector<std::size_t> edge_indices;  // index into each step's edge list
  double importance = 0.0;
  EntityId destination = 0;

  // Path with IDENTITY self-loops removed.
  std::vector<Edge> compressed() const;
};

struct TopKOptions {
  std::size_t beam_width = 0;  // per-entity prefixes kept per step; 0 = 4k
  bool exhaustive = false;     // enumerate every path (small traces only)
  std::size_t max_exhaustive_paths = 1'000'000;
};

// Paths sorted by importance (descending), ties by edge indices ascending.
// At most k results; k = 0 gives an empty list.
std::vector<PathExplanation> top_k_paths(const FrontierTrace& trace, const EdgeImportance& importance,
                                         EntityId target, std::size_t k, const TopKOptions& options = {});

struct Interpretation {
  Query query;
  EntityId target = 0;
  double score = 0.0;
  bool reachable = false;
  std::vector<PathExplanation> paths;
};

// Full pipeline for one query: collect, encode, pick the target (highest
// score, lowest id on ties, unless given), attribute and extract paths.
Interpretation interpret(const ModelParams& params, const TemporalGraph& graph, const Query& query,
                         const FrontierOptions& frontier, std::size_t k, std::optional<EntityId> target = std::nullopt,
                         Attribution mode = Attribution::logit, const TopKOptions& options = {});

void render_interpretation(std::ostream& out, const Interpretation& interp, const Vocab& vocab);
// TSV: path rank importance hop subject relation object time.
void write_interpretation_tsv(std::ostream& out, const Interpretation& interp, const Vocab& vocab);

}  // namespace tpar
