#include <map>

#include <benchmark/benchmark.h>

#include "tpar/encoder.hpp"
#include "tpar/evaluator.hpp"
#include "tpar/frontier.hpp"
#include "tpar/grad.hpp"
#include "tpar/synth.hpp"
#include "tpar/train.hpp"

using namespace tpar;

namespace {

struct Fixture {
  Dataset data;
  TemporalGraph graph;
  std::vector<Quadruple> queries;
};

const Fixture& fixture(int entities) {
  static std::map<int, Fixture> cache;
  auto it = cache.find(entities);
  if (it != cache.end()) return it->second;
  SynthSpec s;
  s.entities = entities;
  s.chains = entities / 5;
  s.noise_facts = entities * 20;
  s.span = 200;
  s.seed = 11;
  Fixture f;
  f.data = generate_synthetic(s).load();
  f.graph = evaluation_background(f.data, Regime::interpolation, false);
  f.queries.assign(f.data.test.begin(), f.data.test.end());
  return cache.emplace(entities, std::move(f)).first->second;
}

TrainConfig config_for(int dim, int length) {
  TrainConfig c;
  c.dim = dim;
  c.max_length = length;
  return c;
}

Query query_of(const Quadruple& q) { return {q.subject, q.relation, q.time, Regime::interpolation}; }

void BM_Collect(benchmark::State& state) {
  const auto& f = fixture(static_cast<int>(state.range(0)));
  const auto frontier = config_for(16, static_cast<int>(state.range(1))).frontier(f.data.vocab);
  std::size_t i = 0, edges = 0;
  for (auto _ : state) {
    const auto trace = collect(f.graph, query_of(f.queries[i++ % f.queries.size()]), frontier);
    for (const auto& st : trace.steps) edges += st.edges.size();
    benchmark::DoNotOptimize(trace);
  }
  state.counters["edges/query"] = benchmark::Counter(static_cast<double>(edges) / static_cast<double>(state.iterations()));
}
BENCHMARK(BM_Collect)->Args({100, 3})->Args({100, 5})->Args({400, 3})->Args({400, 5});

void BM_EncodeBackward(benchmark::State& state) {
  const auto& f = fixture(200);
  const int dim = static_cast<int>(state.range(0));
  const auto config = config_for(dim, 3);
  const auto params = ModelParams::init(config.model_dims(f.data.vocab), 1, time_span(f.data));
  const auto frontier = config.frontier(f.data.vocab);
  std::vector<FrontierTrace> traces;
  for (std::size_t i = 0; i < std::min<std::size_t>(f.queries.size(), 32); ++i) {
    traces.push_back(collect(f.graph, query_of(f.queries[i]), frontier));
  }
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& trace = traces[i % traces.size()];
    GradTape tape = make_tape(params);
    tape.state = encode_query(params, trace.query, trace);
    benchmark::DoNotOptimize(backward(params, tape, f.queries[i % traces.size()].object));
    ++i;
  }
}
BENCHMARK(BM_EncodeBackward)->Arg(16)->Arg(64)->Arg(128);

void BM_FilteredRank(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) scores[i] = static_cast<double>((i * 2654435761u) % 1000);
  const std::vector<EntityId> filtered{1, 5, 9, 40};
  for (auto _ : state) benchmark::DoNotOptimize(filtered_rank(scores, 3, filtered));
}
BENCHMARK(BM_FilteredRank)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
