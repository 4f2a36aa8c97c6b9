#include "tpar/interpreter.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>

#include "tpar/errors.hpp"

namespace tpar {

EdgeImportance edge_importance(const ModelParams& params, const GradTape& tape, EntityId target,
                               Attribution mode) {
  if (!tape.state) throw Error("edge_importance: no cached forward pass in tape");
  const auto& state = *tape.state;
  EdgeImportance out;
  out.target = target;
  out.values.resize(state.steps.size());
  for (std::size_t l = 0; l < state.steps.size(); ++l) out.values[l].assign(state.steps[l].edges.size(), 0.0);
  if (!state.reached(target)) {
    out.unreachable = true;
    return out;
  }
  GradTape scratch;
  scratch.state = state;
  scratch.grads = ModelParams::zeros(params.dims);
  std::vector<double> seed(state.entities.size(), 0.0);
  seed[static_cast<std::size_t>(*state.local(target))] = 1.0;
  backward_from_scores(params, scratch, seed);
  for (std::size_t l = 0; l < state.steps.size(); ++l) {
    const auto& edges = state.steps[l].edges;
    for (std::size_t k = 0; k < edges.size(); ++k) {
      const double a = edges[k].alpha;
      double g = scratch.logit_grads[l][k];
      // d f / d alpha = (d f / d logit) / (alpha (1 - alpha)).
      if (mode == Attribution::alpha) g = g / (1.0 - a);
      else g *= a;
      out.values[l][k] = g;
    }
  }
  return out;
}

std::vector<Edge> PathExplanation::compressed() const {
  std::vector<Edge> out;
  for (const auto& e : path) {
    if (!e.identity) out.push_back(e);
  }
  return out;
}

namespace {

struct Prefix {
  double score = 0.0;
  std::vector<std::size_t> edges;
};

// Descending score, then ascending edge indices.
bool better(const Prefix& a, const Prefix& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.edges < b.edges;
}

PathExplanation to_explanation(const FrontierTrace& trace, const Prefix& p, EntityId target) {
  PathExplanation x;
  x.importance = p.score;
  x.edge_indices = p.edges;
  x.destination = target;
  for (std::size_t l = 0; l < p.edges.size(); ++l) x.path.push_back(trace.steps[l].edges[p.edges[l]]);
  return x;
}

std::vector<PathExplanation> exhaustive_paths(const FrontierTrace& trace, const EdgeImportance& imp, EntityId target,
                                              std::size_t k, std::size_t limit) {
  const auto L = trace.steps.size();
  std::vector<Prefix> found;
  std::size_t visited = 0;
  Prefix cur;
  auto dfs = [&](auto&& self, std::size_t step, EntityId at) -> void {
    if (step == L) {
      if (at == target) found.push_back(cur);
      return;
    }
    const auto& edges = trace.steps[step].edges;
    for (std::size_t i = 0; i < edges.size(); ++i) {
      if (edges[i].src != at) continue;
      if (++visited > limit) throw OracleGuardError("exhaustive path search exceeded its path budget");
      cur.edges.push_back(i);
      cur.score += imp.values[step][i];
      self(self, step + 1, edges[i].dst);
      cur.score -= imp.values[step][i];
      cur.edges.pop_back();
    }
  };
  dfs(dfs, 0, trace.query.entity);
  // Recompute sums in path order so they match the beam's accumulation.
  for (auto& p : found) {
    p.score = 0.0;
    for (std::size_t l = 0; l < p.edges.size(); ++l) p.score += imp.values[l][p.edges[l]];
  }
  std::sort(found.begin(), found.end(), better);
  if (found.size() > k) found.resize(k);
  std::vector<PathExplanation> out;
  for (const auto& p : found) out.push_back(to_explanation(trace, p, target));
  return out;
}

}  // namespace

std::vector<PathExplanation> top_k_paths(const FrontierTrace& trace, const EdgeImportance& importance,
                                         EntityId target, std::size_t k, const TopKOptions& options) {
  if (k == 0 || trace.steps.empty()) return {};
  if (importance.values.size() != trace.steps.size()) throw ShapeError("top_k_paths: importance/trace step mismatch");
  for (std::size_t l = 0; l < trace.steps.size(); ++l) {
    if (importance.values[l].size() != trace.steps[l].edges.size()) {
      throw ShapeError("top_k_paths: importance/trace edge mismatch");
    }
  }
  if (options.exhaustive) return exhaustive_paths(trace, importance, target, k, options.max_exhaustive_paths);

  const std::size_t width = std::max(k, options.beam_width ? options.beam_width : 4 * k);
  // Best prefixes ending at each entity after the current step.
  std::map<EntityId, std::vector<Prefix>> frontier;
  frontier[trace.query.entity].push_back(Prefix{});
  for (std::size_t l = 0; l < trace.steps.size(); ++l) {
    std::map<EntityId, std::vector<Prefix>> next;
    const auto& edges = trace.steps[l].edges;
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const auto it = frontier.find(edges[i].src);
      if (it == frontier.end()) continue;
      auto& bucket = next[edges[i].dst];
      for (const auto& p : it->second) {
        Prefix q;
        q.score = p.score + importance.values[l][i];
        q.edges = p.edges;
        q.edges.push_back(i);
        bucket.push_back(std::move(q));
      }
    }
    for (auto& [entity, bucket] : next) {
      std::sort(bucket.begin(), bucket.end(), better);
      if (bucket.size() > width) bucket.resize(width);
    }
    frontier = std::move(next);
  }
  std::vector<PathExplanation> out;
  const auto it = frontier.find(target);
  if (it == frontier.end()) return out;
  for (std::size_t i = 0; i < it->second.size() && i < k; ++i) out.push_back(to_explanation(trace, it->second[i], target));
  return out;
}

Interpretation interpret(const ModelParams& params, const TemporalGraph& graph, const Query& query,
                         const FrontierOptions& frontier, std::size_t k, std::optional<EntityId> target,
                         Attribution mode, const TopKOptions& options) {
  auto fopts = frontier;
  fopts.max_length = params.dims.max_length;
  const auto trace = collect(graph, query, fopts);
  GradTape tape;
  tape.state = encode_query(params, query, trace);
  const auto scores = score_all(params, *tape.state, params.dims.num_entities);

  Interpretation out;
  out.query = query;
  out.target = target ? *target
                      : static_cast<EntityId>(std::max_element(scores.begin(), scores.end()) - scores.begin());
  if (out.target < 0 || out.target >= params.dims.num_entities) throw QueryError("interpret: target outside the vocabulary");
  out.score = scores[static_cast<std::size_t>(out.target)];
  const auto imp = edge_importance(params, tape, out.target, mode);
  out.reachable = !imp.unreachable;
  if (out.reachable) out.paths = top_k_paths(trace, imp, out.target, k, options);
  return out;
}

void render_interpretation(std::ostream& out, const Interpretation& interp, const Vocab& vocab) {
  const auto flags = out.flags();
  const auto& q = interp.query;
  out << "query  (" << vocab.entity_name(q.entity) << ", " << vocab.relation_name(q.relation) << ", ?, "
      << vocab.format_time(q.time) << ")  [" << to_string(q.regime) << "]\n";
  out << "answer " << vocab.entity_name(interp.target) << "  score " << std::setprecision(6) << interp.score << '\n';
  if (!interp.reachable) {
    out << "  (answer not reached by any temporal path)\n";
    out.flags(flags);
    return;
  }
  for (std::size_t i = 0; i < interp.paths.size(); ++i) {
    const auto& p = interp.paths[i];
    out << "P" << i + 1 << "  importance " << std::setprecision(6) << p.importance << '\n';
    const auto hops = p.compressed();
    if (hops.empty()) out << "    (query entity itself)\n";
    for (const auto& e : hops) {
      out << "    " << vocab.format_time(e.time) << "  " << vocab.entity_name(e.src) << " --"
          << vocab.relation_name(e.relation) << "--> " << vocab.entity_name(e.dst) << '\n';
    }
  }
  out.flags(flags);
}

void write_interpretation_tsv(std::ostream& out, const Interpretation& interp, const Vocab& vocab) {
  out << "path\timportance\thop\tsubject\trelation\tobject\ttime\n";
  for (std::size_t i = 0; i < interp.paths.size(); ++i) {
    const auto& p = interp.paths[i];
    const auto hops = p.compressed();
    for (std::size_t h = 0; h < hops.size(); ++h) {
      const auto& e = hops[h];
      out << i + 1 << '\t' << p.importance << '\t' << h + 1 << '\t' << vocab.entity_name(e.src) << '\t'
          << vocab.relation_name(e.relation) << '\t' << vocab.entity_name(e.dst) << '\t' << vocab.format_time(e.time)
          << '\n';
    }
  }
}

}  // namespace tpar
