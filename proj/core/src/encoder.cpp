#include "tpar/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tpar/errors.hpp"
#include "tpar/rng.hpp"

namespace tpar {

namespace {

void require_same_dim(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) throw ShapeError(std::string(what) + ": dimension mismatch");
}

// Keeps cached weights strictly inside (0, 1).
constexpr double kAlphaLo = std::numeric_limits<double>::min();
constexpr double kAlphaHi = 1.0 - std::numeric_limits<double>::epsilon() / 2;

}  // namespace

double sigmoid(double x) noexcept {
  double s;
  if (x >= 0) {
    s = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    s = e / (1.0 + e);
  }
  return std::clamp(s, kAlphaLo, kAlphaHi);
}

double activate(Activation a, double x) noexcept {
  switch (a) {
    case Activation::identity: return x;
    case Activation::tanh: return std::tanh(x);
    case Activation::relu: return x > 0 ? x : 0.0;
  }
  return x;
}

Eigen::VectorXd message(const Eigen::Ref<const Eigen::VectorXd>& h_src, const Eigen::Ref<const Eigen::VectorXd>& h_rel,
                        const Eigen::Ref<const Eigen::VectorXd>& h_time) {
  require_same_dim(h_src.size(), h_rel.size(), "message");
  require_same_dim(h_src.size(), h_time.size(), "message");
  return h_src + h_rel + h_time;
}

double attention_weight(const Eigen::Ref<const Eigen::VectorXd>& h_src, const Eigen::Ref<const Eigen::VectorXd>& h_rel,
                        const Eigen::Ref<const Eigen::VectorXd>& h_query_rel,
                        const Eigen::Ref<const Eigen::VectorXd>& h_time,
                        const Eigen::Ref<const Eigen::MatrixXd>& attn_hidden,
                        const Eigen::Ref<const Eigen::VectorXd>& attn_out) {
  const auto d = h_src.size();
  require_same_dim(h_rel.size(), d, "attention_weight");
  require_same_dim(h_query_rel.size(), d, "attention_weight");
  require_same_dim(h_time.size(), d, "attention_weight");
  require_same_dim(attn_hidden.cols(), 4 * d, "attention_weight");
  require_same_dim(attn_hidden.rows(), attn_out.size(), "attention_weight");
  Eigen::VectorXd u(4 * d);
  u << h_src, h_rel, h_query_rel, h_time;
  const Eigen::VectorXd hidden = (attn_hidden * u).cwiseMax(0.0);
  return sigmoid(attn_out.dot(hidden));
}

Eigen::VectorXd aggregate(std::span<const std::pair<Eigen::VectorXd, double>> incoming,
                          const Eigen::Ref<const Eigen::MatrixXd>& w_agg, Activation activation) {
  if (incoming.empty()) throw ShapeError("aggregate: empty incoming list");
  const auto d = incoming.front().first.size();
  require_same_dim(w_agg.cols(), d, "aggregate");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  for (const auto& [m, alpha] : incoming) {
    require_same_dim(m.size(), d, "aggregate");
    sum += alpha * m;
  }
  Eigen::VectorXd out = w_agg * sum;
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = activate(activation, out[i]);
  return out;
}

std::optional<int> EncodingState::local(EntityId e) const {
  const auto it = std::lower_bound(entities.begin(), entities.end(), e);
  if (it == entities.end() || *it != e) return std::nullopt;
  return static_cast<int>(it - entities.begin());
}

Eigen::VectorXd EncodingState::representation(EntityId e, int step) const {
  const auto idx = local(e);
  if (steps.empty() || step < 1) return {};
  const auto& st = steps[static_cast<std::size_t>(step - 1)];
  const auto d = st.output.rows();
  if (!idx || st.column[static_cast<std::size_t>(*idx)] < 0) return Eigen::VectorXd::Zero(d);
  return st.output.col(st.column[static_cast<std::size_t>(*idx)]);
}

bool EncodingState::reached(EntityId e) const {
  const auto idx = local(e);
  return idx && !steps.empty() && steps.back().column[static_cast<std::size_t>(*idx)] >= 0;
}

EncodingState encode_query(const ModelParams& params, const Query& query, const FrontierTrace& trace,
                           const EncodeOptions& options) {
  if (!(trace.query == query)) throw Error("encode_query: trace was collected for a different query");
  const auto& dims = params.dims;
  if (trace.num_steps() != static_cast<std::size_t>(dims.max_length)) {
    throw ShapeError("encode_query: trace has " + std::to_string(trace.num_steps()) +
                     " steps but the model expects " + std::to_string(dims.max_length));
  }
  if (query.relation < 0 || query.relation >= dims.relation_table_size()) {
    throw ShapeError("encode_query: query relation outside the model's relation table");
  }
  const int d = dims.dim;
  const bool use_dropout = options.mode == Mode::train && options.dropout > 0.0;
  if (options.dropout < 0.0 || options.dropout >= 1.0) throw ConfigError("dropout", "must lie in [0, 1)");

  EncodingState state;
  state.query = query;
#ifdef TPAR_TEST_HOOKS
  state.unit_attention = options.unit_attention;
#endif
  state.entities = trace.visited();
  if (state.entities.empty()) state.entities.push_back(query.entity);
  const auto n = state.entities.size();
  state.steps.resize(trace.num_steps());

  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd u(4 * d);

  for (int l = 1; l <= dims.max_length; ++l) {
    const auto& tstep = trace.steps[static_cast<std::size_t>(l - 1)];
    auto& st = state.steps[static_cast<std::size_t>(l - 1)];
    const StepState* prev = l > 1 ? &state.steps[static_cast<std::size_t>(l - 2)] : nullptr;
    const auto& rel = params.relations(l);
    const auto& w_hidden = params.attention_hidden[static_cast<std::size_t>(l - 1)];
    const auto& w_out = params.attention_out[static_cast<std::size_t>(l - 1)];
    const auto h_query_rel = rel.col(query.relation);

    st.column.assign(n, -1);
    for (EntityId e : tstep.destinations) {
      const auto idx = state.local(e);
      if (!idx) throw Error("encode_query: destination outside the trace's visited set");
      st.column[static_cast<std::size_t>(*idx)] = static_cast<int>(st.destinations.size());
      st.destinations.push_back(*idx);
    }
    const auto m = static_cast<Eigen::Index>(st.destinations.size());
    st.aggregated = Eigen::MatrixXd::Zero(d, m);

    st.edges.reserve(tstep.edges.size());
    for (const auto& edge : tstep.edges) {
      if (edge.relation < 0 || edge.relation >= dims.relation_table_size()) {
        throw ShapeError("encode_query: link relation outside the model's relation table");
      }
      EdgeCache ec;
      ec.src = *state.local(edge.src);
      ec.dst = *state.local(edge.dst);
      ec.relation = edge.relation;
      ec.dt = edge.identity ? 0.0 : static_cast<double>(edge.time - query.time);
      const Eigen::VectorXd h_time = encode_delta(params.time, ec.dt);
      Eigen::VectorXd h_src = zero;
      if (prev) {
        const int c = prev->column[static_cast<std::size_t>(ec.src)];
        if (c >= 0) h_src = prev->output.col(c);
      }
      const auto h_rel = rel.col(edge.relation);
      ec.message = h_src + h_rel + h_time;
      if (state.unit_attention) {
        ec.alpha = 1.0;
      } else {
        u << h_src, h_rel, h_query_rel, h_time;
        ec.hidden = w_hidden * u;
        ec.logit = w_out.dot(ec.hidden.cwiseMax(0.0));
        ec.alpha = sigmoid(ec.logit);
      }
      st.aggregated.col(st.column[static_cast<std::size_t>(ec.dst)]) += ec.alpha * ec.message;
      st.edges.push_back(std::move(ec));
    }

    st.pre = params.aggregation[static_cast<std::size_t>(l - 1)] * st.aggregated;
    st.output = st.pre.unaryExpr([a = dims.activation](double x) { return activate(a, x); });
    if (use_dropout) {
      const double keep_scale = 1.0 / (1.0 - options.dropout);
      st.dropout_scale.resize(d, m);
      for (Eigen::Index c = 0; c < m; ++c) {
        const auto entity = static_cast<std::uint64_t>(state.entities[static_cast<std::size_t>(st.destinations[static_cast<std::size_t>(c)])]);
        for (int i = 0; i < d; ++i) {
          const double r = hash_uniform01(mix_seeds(options.seed, static_cast<std::uint64_t>(l), entity,
                                                    static_cast<std::uint64_t>(i)));
          st.dropout_scale(i, c) = r < options.dropout ? 0.0 : keep_scale;
        }
      }
      st.output = st.output.cwiseProduct(st.dropout_scale);
    }
  }
  return state;
}

}  // namespace tpar
