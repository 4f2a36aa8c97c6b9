#pragma once

// Scoring f(q, e) = w . h^L(e), the multi-class log-loss over all entities,
// the analytic reverse pass through the encoder, and Adam.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tpar/encoder.hpp"
#include "tpar/model.hpp"

namespace tpar {

double score(const ModelParams& params, const EncodingState& state, EntityId entity);

// Scores for every entity in [0, num_entities); unreached entities score 0.
std::vector<double> score_all(const ModelParams& params, const EncodingState& state, std::int32_t num_entities);

// -f(gold) + log sum_e exp f(e), with a max shift.
double log_loss(std::span<const double> scores, EntityId gold);

// Cached forward state plus gradients shaped like the parameters.
struct GradTape {
  std::optional<EncodingState> state;
  ModelParams grads;
  // Per step, per edge: d(objective)/d(attention logit). Filled by backward.
  std::vector<std::vector<double>> logit_grads;
};

GradTape make_tape(const ModelParams& params);

// Reverse pass for an arbitrary objective given d(objective)/d f(e) for the
// entities of the state (indexed like state.entities). Gradients are added
// into tape.grads; tape.logit_grads is overwritten.
void backward_from_scores(const ModelParams& params, GradTape& tape, std::span<const double> dscore_local);

// Forward already cached in the tape; accumulates the log-loss gradient for
// `gold` and returns the loss.
double backward(const ModelParams& params, GradTape& tape, EntityId gold);

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  static AdamState for_params(const ModelParams& params, const AdamConfig& config);
};

// Bias-corrected Adam update. Throws TrainingError naming the tensor if any
// gradient is non-finite; parameters are left untouched in that case.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state);

}  // namespace tpar
