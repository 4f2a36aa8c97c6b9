#pragma once

// Query-conditioned recursive encoding over a FrontierTrace.
//
// For each step l and link (s, r, o, t) of that step:
//   M     = h^{l-1}_s + h^l_r + h_t
//   alpha = sigmoid(w_a^l . relu(W_a^l [h^{l-1}_s | h^l_r | h^l_{r_q} | h_t]))
//   h^l_o = act(W^l * sum alpha * M)
// starting from h^0_{e_q} = 0. Entities without incoming links at step l have
// h^l = 0.

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "tpar/frontier.hpp"
#include "tpar/model.hpp"

namespace tpar {

enum class Mode { train, inference };

struct EncodeOptions {
  Mode mode = Mode::inference;
  double dropout = 0.0;  // applied to each step's output in train mode
  std::uint64_t seed = 0;
#ifdef TPAR_TEST_HOOKS
  bool unit_attention = false;  // alpha == 1 on every link
#endif
};

Eigen::VectorXd message(const Eigen::Ref<const Eigen::VectorXd>& h_src,
                        const Eigen::Ref<const Eigen::VectorXd>& h_rel,
                        const Eigen::Ref<const Eigen::VectorXd>& h_time);

// W_a is d_a x 4d, w_a has length d_a.
double attention_weight(const Eigen::Ref<const Eigen::VectorXd>& h_src,
                        const Eigen::Ref<const Eigen::VectorXd>& h_rel,
                        const Eigen::Ref<const Eigen::VectorXd>& h_query_rel,
                        const Eigen::Ref<const Eigen::VectorXd>& h_time,
                        const Eigen::Ref<const Eigen::MatrixXd>& attn_hidden,
                        const Eigen::Ref<const Eigen::VectorXd>& attn_out);

double sigmoid(double x) noexcept;
double activate(Activation a, double x) noexcept;

Eigen::VectorXd aggregate(std::span<const std::pair<Eigen::VectorXd, double>> incoming,
                          const Eigen::Ref<const Eigen::MatrixXd>& w_agg, Activation activation);

struct EdgeCache {
  int src = 0;  // local entity index
  int dst = 0;
  RelationId relation = 0;
  double dt = 0.0;
  Eigen::VectorXd message;
  Eigen::VectorXd hidden;  // W_a U before ReLU; empty under unit attention
  double logit = 0.0;
  double alpha = 1.0;
};

struct StepState {
  std::vector<EdgeCache> edges;
  std::vector<int> destinations;  // local indices, ascending
  std::vector<int> column;        // local index -> column in the matrices below, or -1
  Eigen::MatrixXd aggregated;     // d x |destinations|: sum alpha * M
  Eigen::MatrixXd pre;            // W^l * aggregated
  Eigen::MatrixXd output;         // h^l after activation and dropout
  Eigen::MatrixXd dropout_scale;  // empty unless dropout was applied
};

struct EncodingState {
  Query query;
  std::vector<EntityId> entities;  // local index -> entity id, ascending (E^L)
  std::vector<StepState> steps;
  bool unit_attention = false;

  std::optional<int> local(EntityId e) const;
  // h^l for a 1-based step, zero when the entity has no entry.
  Eigen::VectorXd representation(EntityId e, int step) const;
  // h^L.
  Eigen::VectorXd representation(EntityId e) const { return representation(e, static_cast<int>(steps.size())); }
  bool reached(EntityId e) const;  // has a non-implicit h^L entry
};

EncodingState encode_query(const ModelParams& params, const Query& query, const FrontierTrace& trace,
                           const EncodeOptions& options = {});

}  // namespace tpar
