#include "tpar/grad.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tpar/errors.hpp"

namespace tpar {

double score(const ModelParams& params, const EncodingState& state, EntityId entity) {
  if (!state.reached(entity)) return 0.0;
  return params.score.dot(state.representation(entity));
}

std::vector<double> score_all(const ModelParams& params, const EncodingState& state, std::int32_t num_entities) {
  std::vector<double> scores(static_cast<std::size_t>(num_entities), 0.0);
  if (state.steps.empty()) return scores;
  const auto& last = state.steps.back();
  const Eigen::VectorXd local = last.output.transpose() * params.score;
  for (std::size_t c = 0; c < last.destinations.size(); ++c) {
    const EntityId e = state.entities[static_cast<std::size_t>(last.destinations[c])];
    if (e >= 0 && e < num_entities) scores[static_cast<std::size_t>(e)] = local[static_cast<Eigen::Index>(c)];
  }
  return scores;
}

double log_loss(std::span<const double> scores, EntityId gold) {
  if (gold < 0 || static_cast<std::size_t>(gold) >= scores.size()) {
    throw Error("log_loss: gold entity " + std::to_string(gold) + " outside the vocabulary");
  }
  const double mx = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - mx);
  return -scores[static_cast<std::size_t>(gold)] + mx + std::log(z);
}

GradTape make_tape(const ModelParams& params) {
  GradTape tape;
  tape.grads = ModelParams::zeros(params.dims);
  return tape;
}

namespace {

double activation_derivative(Activation a, double pre) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::tanh: {
      const double t = std::tanh(pre);
      return 1.0 - t * t;
    }
    case Activation::relu: return pre > 0 ? 1.0 : 0.0;
  }
  return 1.0;
}

}  // namespace

void backward_from_scores(const ModelParams& params, GradTape& tape, std::span<const double> dscore_local) {
  if (!tape.state) throw Error("backward: no cached forward pass in tape");
  const auto& state = *tape.state;
  if (dscore_local.size() != state.entities.size()) throw ShapeError("backward: score gradient size mismatch");
  auto& grads = tape.grads;
  const auto& dims = params.dims;
  const int d = dims.dim;
  const int L = static_cast<int>(state.steps.size());
  const auto& query = state.query;

  tape.logit_grads.assign(state.steps.size(), {});
  if (L == 0) return;

  // Seed: d f(e) / d h^L(e) = w.
  const auto& last = state.steps.back();
  Eigen::MatrixXd g_out = Eigen::MatrixXd::Zero(d, static_cast<Eigen::Index>(last.destinations.size()));
  for (std::size_t c = 0; c < last.destinations.size(); ++c) {
    const double ds = dscore_local[static_cast<std::size_t>(last.destinations[c])];
    if (ds == 0.0) continue;
    grads.score += ds * last.output.col(static_cast<Eigen::Index>(c));
    g_out.col(static_cast<Eigen::Index>(c)) = ds * params.score;
  }

  Eigen::VectorXd u(4 * d);
  Eigen::VectorXd g_u(4 * d);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);

  for (int l = L; l >= 1; --l) {
    const auto& st = state.steps[static_cast<std::size_t>(l - 1)];
    const StepState* prev = l > 1 ? &state.steps[static_cast<std::size_t>(l - 2)] : nullptr;
    const auto si = static_cast<std::size_t>(l - 1);
    const auto& rel = params.relations(l);
    auto& g_rel = grads.relations(l);
    const auto& w_agg = params.aggregation[si];
    const auto& w_hidden = params.attention_hidden[si];
    const auto& w_out = params.attention_out[si];
    auto& g_hidden_w = grads.attention_hidden[si];
    auto& g_out_w = grads.attention_out[si];

    Eigen::MatrixXd g_post = st.dropout_scale.size() ? Eigen::MatrixXd(g_out.cwiseProduct(st.dropout_scale)) : g_out;
    Eigen::MatrixXd g_pre(g_post.rows(), g_post.cols());
    for (Eigen::Index c = 0; c < g_post.cols(); ++c) {
      for (Eigen::Index i = 0; i < d; ++i) {
        g_pre(i, c) = g_post(i, c) * activation_derivative(dims.activation, st.pre(i, c));
      }
    }
    grads.aggregation[si].noalias() += g_pre * st.aggregated.transpose();
    const Eigen::MatrixXd g_sum = w_agg.transpose() * g_pre;

    Eigen::MatrixXd g_prev;
    if (prev) g_prev = Eigen::MatrixXd::Zero(d, static_cast<Eigen::Index>(prev->destinations.size()));
    auto& logit_grads = tape.logit_grads[si];
    logit_grads.assign(st.edges.size(), 0.0);
    const auto h_query_rel = rel.col(query.relation);

    for (std::size_t k = 0; k < st.edges.size(); ++k) {
      const auto& ec = st.edges[k];
      const auto gs = g_sum.col(st.column[static_cast<std::size_t>(ec.dst)]);
      if (gs.isZero(0.0)) continue;
      const Eigen::VectorXd g_msg = ec.alpha * gs;
      Eigen::VectorXd g_src = g_msg;
      Eigen::VectorXd g_rel_col = g_msg;
      Eigen::VectorXd g_time = g_msg;
      int prev_col = -1;
      if (prev) prev_col = prev->column[static_cast<std::size_t>(ec.src)];
      if (!state.unit_attention) {
        const double g_logit = gs.dot(ec.message) * ec.alpha * (1.0 - ec.alpha);
        logit_grads[k] = g_logit;
        if (g_logit != 0.0) {
          g_out_w += g_logit * ec.hidden.cwiseMax(0.0);
          Eigen::VectorXd g_hidden = g_logit * w_out;
          for (Eigen::Index i = 0; i < g_hidden.size(); ++i) {
            if (!(ec.hidden[i] > 0)) g_hidden[i] = 0.0;
          }
          const Eigen::VectorXd h_src = prev_col >= 0 ? Eigen::VectorXd(prev->output.col(prev_col)) : zero;
          u << h_src, rel.col(ec.relation), h_query_rel, encode_delta(params.time, ec.dt);
          g_hidden_w.noalias() += g_hidden * u.transpose();
          g_u.noalias() = w_hidden.transpose() * g_hidden;
          g_src += g_u.segment(0, d);
          g_rel_col += g_u.segment(d, d);
          g_rel.col(query.relation) += g_u.segment(2 * d, d);
          g_time += g_u.segment(3 * d, d);
        }
      }
      if (prev_col >= 0) g_prev.col(prev_col) += g_src;
      g_rel.col(ec.relation) += g_rel_col;
      accumulate_time_codec_grad(params.time, ec.dt, g_time, grads.time);
    }
    g_out = std::move(g_prev);
  }
}

double backward(const ModelParams& params, GradTape& tape, EntityId gold) {
  if (!tape.state) throw Error("backward: no cached forward pass in tape");
  const auto& state = *tape.state;
  const auto num_entities = params.dims.num_entities;
  if (gold < 0 || gold >= num_entities) {
    throw Error("backward: gold entity " + std::to_string(gold) + " outside the vocabulary");
  }
  // Scores of local entities; everything else contributes exp(0) terms.
  const auto n = state.entities.size();
  std::vector<double> local(n, 0.0);
  if (!state.steps.empty()) {
    const auto& last = state.steps.back();
    const Eigen::VectorXd s = last.output.transpose() * params.score;
    for (std::size_t c = 0; c < last.destinations.size(); ++c) {
      local[static_cast<std::size_t>(last.destinations[c])] = s[static_cast<Eigen::Index>(c)];
    }
  }
  const auto outside = static_cast<double>(num_entities) - static_cast<double>(n);
  double mx = outside > 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  for (double s : local) mx = std::max(mx, s);
  double z = outside * std::exp(-mx);
  for (double s : local) z += std::exp(s - mx);
  const auto gold_local = state.local(gold);
  const double f_gold = gold_local ? local[static_cast<std::size_t>(*gold_local)] : 0.0;
  const double loss = -f_gold + mx + std::log(z);

  std::vector<double> dscore(n);
  for (std::size_t i = 0; i < n; ++i) dscore[i] = std::exp(local[i] - mx) / z;
  if (gold_local) dscore[static_cast<std::size_t>(*gold_local)] -= 1.0;
  backward_from_scores(params, tape, dscore);
  return loss;
}

AdamState AdamState::for_params(const ModelParams& params, const AdamConfig& config) {
  AdamState state;
  state.config = config;
  for (const auto& t : params.tensors()) {
    state.first_moment.emplace_back(t.values.size(), 0.0);
    state.second_moment.emplace_back(t.values.size(), 0.0);
  }
  return state;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state) {
  auto values = params.tensors();
  const auto g = grads.tensors();
  if (values.size() != g.size() || values.size() != state.first_moment.size()) {
    throw ShapeError("adam_step: tensor count mismatch");
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i].values.size() != values[i].values.size() || state.first_moment[i].size() != values[i].values.size()) {
      throw ShapeError("adam_step: shape mismatch in " + values[i].name);
    }
    for (double v : g[i].values) {
      if (!std::isfinite(v)) throw TrainingError("non-finite gradient in tensor " + g[i].name);
    }
  }
  const auto& c = state.config;
  ++state.step;
  const double bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t k = 0; k < m.size(); ++k) {
      const double gk = g[i].values[k];
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * gk;
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * gk * gk;
      const double m_hat = m[k] / bias1;
      const double v_hat = v[k] / bias2;
      values[i].values[k] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

}  // namespace tpar
