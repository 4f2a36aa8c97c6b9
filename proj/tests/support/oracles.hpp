#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. None of these call into the code paths they check beyond data
// structures (graphs, paths, parameters).

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tpar/frontier.hpp"
#include "tpar/model.hpp"
#include "tpar/rng.hpp"
#include "tpar/store.hpp"

namespace tpar::testing {

// Vocab with entities e0..e{n-1} and relations r0..r{m-1}, frozen, epoch 0,
// index granularity.
Vocab make_vocab(int num_entities, int num_relations);

struct RandomGraphSpec {
  int entities = 6;
  int relations = 2;
  int facts = 10;
  TimeIndex max_time = 10;  // times drawn from [0, max_time]
};

std::vector<Quadruple> random_facts(Rng& rng, const RandomGraphSpec& spec);

// h^L oracle for the linear configuration (identity activation, W = I,
// alpha = 1, no dropout): sum over every length-L path ending at each entity
// of the per-link messages h_r^step + h_t, each link's message divided by the
// number of distinct prefixes reaching its source. Returns one d-vector per
// entity.
std::vector<Eigen::VectorXd> path_sum_oracle(const ModelParams& params, const TemporalGraph& graph,
                                             const Query& query, bool self_loops);

// Straightforward rank: sort the unfiltered candidates by score and place the
// gold at the rounded-up midpoint of its tie block.
std::int64_t naive_filtered_rank(std::span<const double> scores, EntityId gold, std::span<const EntityId> filtered);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

// Five-point central differences with step 5e-4 * max(1, |x|). Relative error is
// |a - n| / max(|a|, |n|, floor).
GradCheckResult finite_difference_check(ModelParams params, const ModelParams& analytic,
                                        const std::function<double(const ModelParams&)>& loss,
                                        double floor = 1e-6);

// Monte-Carlo MRR of uniformly random scores under the given filter sets.
double random_ranking_mrr(std::int32_t num_entities, std::span<const EntityId> golds,
                          std::span<const std::vector<EntityId>> filters, int trials, std::uint64_t seed);

// H(n) / n.
double harmonic_mean_rr(std::int32_t n);

}  // namespace tpar::testing

namespace tpar::testing {

struct GradInstance {
  ModelParams params;
  Vocab vocab;
  TemporalGraph graph;
  Query query;
  EntityId gold = 0;
  FrontierOptions frontier;
  double dropout = 0.0;
  std::uint64_t dropout_seed = 0;
};

// Random tiny instance: |E| <= 6, L <= 3, d <= 4, with the given activation.
// Redraws until every ReLU input sits at least `kink_margin` from zero, since
// finite differences are meaningless across a kink.
GradInstance random_grad_instance(std::uint64_t seed, Activation activation, double kink_margin = 5e-3);

// Analytic backward versus central differences of the forward log-loss.
GradCheckResult check_instance(const GradInstance& inst);

}  // namespace tpar::testing
