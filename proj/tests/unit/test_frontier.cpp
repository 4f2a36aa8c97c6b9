#include <doctest.h>

#include <tuple>

#include <algorithm>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "tpar/errors.hpp"
#include "tpar/frontier.hpp"

using namespace tpar;

namespace {

FrontierOptions options(const Vocab& v, int L, bool self_loops) {
  FrontierOptions o;
  o.max_length = L;
  o.self_loops = self_loops;
  o.identity_relation = v.identity_relation();
  return o;
}

bool has_edge(const FrontierStep& s, EntityId src, EntityId dst, bool identity = false) {
  return std::any_of(s.edges.begin(), s.edges.end(),
                     [&](const Edge& e) { return e.src == src && e.dst == dst && e.identity == identity; });
}

std::set<EntityId> endpoints(const std::vector<TemporalPath>& paths) {
  std::set<EntityId> out;
  for (const auto& p : paths) out.insert(p.back().dst);
  return out;
}

}  // namespace

TEST_CASE("chain graph") {
  const auto v = testing::make_vocab(3, 1);
  const std::vector<Quadruple> facts{{0, 0, 1, 1}, {1, 0, 2, 2}};
  const auto g = TemporalGraph::build(facts, v);
  const Query q{0, 0, 5, Regime::extrapolation};
  const auto t = collect(g, q, options(v, 2, false));
  REQUIRE(t.steps.size() == 2);
  CHECK(t.steps[0].edges.size() == 1);
  CHECK(has_edge(t.steps[0], 0, 1));
  CHECK(has_edge(t.steps[1], 1, 2));
  const auto looped = collect(g, q, options(v, 2, true));
  CHECK(has_edge(looped.steps[1], 0, 0, true));
  CHECK(has_edge(looped.steps[1], 1, 1, true));
  for (const auto& e : looped.steps[1].edges) {
    if (e.identity) CHECK(e.relation == v.identity_relation());
  }
  // 0 -> 1 -> 2 and 0 -> 1 -> 0 over the inverse link.
  CHECK(enumerate_paths(g, q, 2).size() == 2);
}

TEST_CASE("diamond graph") {
  const auto v = testing::make_vocab(4, 1);
  // a=0, b=1, c=2, d=3
  const std::vector<Quadruple> facts{{0, 0, 1, 1}, {0, 0, 2, 1}, {1, 0, 3, 2}, {2, 0, 3, 2}};
  const auto g = TemporalGraph::build(facts, v);
  const Query q{0, 0, 5, Regime::extrapolation};
  const auto t = collect(g, q, options(v, 2, false));
  CHECK(has_edge(t.steps[1], 1, 3));
  CHECK(has_edge(t.steps[1], 2, 3));
  std::size_t to_d = 0;
  for (const auto& p : enumerate_paths(g, q, 2)) to_d += p.back().dst == 3;
  CHECK(to_d == 2);
}

TEST_CASE("regime time rules") {
  const auto v = testing::make_vocab(4, 1);
  const std::vector<Quadruple> facts{{0, 0, 1, 1}, {0, 0, 2, 2}, {0, 0, 3, 3}, {1, 0, 2, 4}};
  const auto g = TemporalGraph::build(facts, v);
  SUBCASE("all earlier links kept") {
    const auto e = expand_step(g, std::vector<EntityId>{0}, Query{0, 0, 4, Regime::extrapolation}, 0, 0);
    CHECK(e.size() == 3);
  }
  SUBCASE("a link at t_q is excluded in extrapolation, kept in interpolation") {
    const auto ex = expand_step(g, std::vector<EntityId>{1}, Query{0, 0, 4, Regime::extrapolation}, 0, 0);
    const auto in = expand_step(g, std::vector<EntityId>{1}, Query{0, 0, 4, Regime::interpolation}, 0, 0);
    CHECK(std::none_of(ex.begin(), ex.end(), [](const Edge& e) { return e.time == 4; }));
    CHECK(std::any_of(in.begin(), in.end(), [](const Edge& e) { return e.time == 4; }));
  }
  SUBCASE("relaxed order collects increasing-time paths") {
    // 0 -t1-> 1 -t4-> 2 with t_q = 6: t1 < t2 < t_q.
    const auto t = collect(g, Query{0, 0, 6, Regime::extrapolation}, options(v, 2, false));
    CHECK(has_edge(t.steps[1], 1, 2));
    auto strict = options(v, 2, false);
    strict.order = ChronologicalOrder::strict;
    const auto s = collect(g, Query{0, 0, 6, Regime::extrapolation}, strict);
    CHECK_FALSE(std::any_of(s.steps[1].edges.begin(), s.steps[1].edges.end(),
                            [](const Edge& e) { return e.src == 1 && e.dst == 2 && e.time == 4; }));
  }
  SUBCASE("blocked route gives no paths") {
    const std::vector<Quadruple> late{{0, 0, 1, 7}, {1, 0, 2, 1}};
    const auto lg = TemporalGraph::build(late, v);
    CHECK(enumerate_paths(lg, Query{0, 0, 5, Regime::extrapolation}, 2).empty());
  }
}

TEST_CASE("unknown query entity gives an empty trace") {
  const auto v = testing::make_vocab(3, 1);
  const auto g = TemporalGraph::build(std::vector<Quadruple>{{0, 0, 1, 1}}, v);
  const auto t = collect(g, Query{17, 0, 5, Regime::interpolation}, options(v, 3, true));
  CHECK(t.steps.size() == 3);
  CHECK(t.num_edges() == 0);
  CHECK_THROWS_AS(collect(g, Query{0, 0, 5, Regime::interpolation}, options(v, 0, true)), ConfigError);
}

TEST_CASE("oracle equivalence and visited-set properties") {
  Rng rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 3 + static_cast<int>(rng.bounded(10));
    const auto v = testing::make_vocab(n, 2);
    const auto facts = testing::random_facts(rng, {n, 2, 2 + static_cast<int>(rng.bounded(14)), 10});
    const auto g = TemporalGraph::build(facts, v);
    const Regime regime = trial % 2 ? Regime::interpolation : Regime::extrapolation;
    const Query q{static_cast<EntityId>(rng.bounded(static_cast<std::uint64_t>(n))), 0,
                  static_cast<TimeIndex>(rng.bounded(12)), regime};
    for (auto order : {ChronologicalOrder::relaxed, ChronologicalOrder::strict}) {
      auto o = options(v, 5, false);
      o.order = order;
      const auto t = collect(g, q, o);
      EnumerateOptions eo;
      eo.order = order;
      std::vector<EntityId> prev{q.entity};
      for (int l = 1; l <= 5; ++l) {
        const auto& step = t.steps[static_cast<std::size_t>(l - 1)];
        const auto ends = endpoints(enumerate_paths(g, q, l, eo));
        CHECK(std::set<EntityId>(step.destinations.begin(), step.destinations.end()) == ends);
        CHECK(std::includes(step.visited.begin(), step.visited.end(), prev.begin(), prev.end()));
        prev = step.visited;
        // Sources come from the previous step's destinations.
        const auto& active = l == 1 ? std::vector<EntityId>{q.entity} : t.steps[static_cast<std::size_t>(l - 2)].destinations;
        for (const auto& e : step.edges) CHECK(std::binary_search(active.begin(), active.end(), e.src));
        // No duplicate links within a step.
        std::set<Edge> unique(step.edges.begin(), step.edges.end());
        CHECK(unique.size() == step.edges.size());
      }
    }
  }
}

TEST_CASE("extrapolation traces ignore facts at or after t_q") {
  Rng rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    const auto v = testing::make_vocab(8, 2);
    auto facts = testing::random_facts(rng, {8, 2, 18, 10});
    const Query q{static_cast<EntityId>(rng.bounded(8)), 1, 6, Regime::extrapolation};
    const auto before = collect(TemporalGraph::build(facts, v), q, options(v, 4, true));
    auto extra = facts;
    for (int i = 0; i < 10; ++i) {
      extra.push_back({static_cast<EntityId>(rng.bounded(8)), static_cast<RelationId>(rng.bounded(2)),
                       static_cast<EntityId>(rng.bounded(8)), 6 + static_cast<TimeIndex>(rng.bounded(5))});
    }
    deduplicate(extra);
    std::vector<Quadruple> trimmed;
    for (const auto& f : facts) {
      if (f.time < 6) trimmed.push_back(f);
    }
    const auto after = collect(TemporalGraph::build(extra, v), q, options(v, 4, true));
    const auto cut = collect(TemporalGraph::build(trimmed, v), q, options(v, 4, true));
    std::ostringstream a, b, c;
    write_trace(a, before);
    write_trace(b, after);
    write_trace(c, cut);
    CHECK(a.str() == b.str());
    CHECK(a.str() == c.str());
  }
}

TEST_CASE("strict traces are contained in relaxed traces") {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const auto v = testing::make_vocab(10, 3);
    const auto g = TemporalGraph::build(testing::random_facts(rng, {10, 3, 30, 12}), v);
    const Query q{static_cast<EntityId>(rng.bounded(10)), 0, 13, Regime::extrapolation};
    auto strict = options(v, 4, true);
    strict.order = ChronologicalOrder::strict;
    const auto s = collect(g, q, strict);
    const auto r = collect(g, q, options(v, 4, true));
    for (std::size_t l = 0; l < 4; ++l) {
      std::set<Edge> relaxed(r.steps[l].edges.begin(), r.steps[l].edges.end());
      for (const auto& e : s.steps[l].edges) CHECK(relaxed.count(e) == 1);
    }
  }
}

TEST_CASE("degree cap is seeded and bounded") {
  const auto v = testing::make_vocab(20, 1);
  std::vector<Quadruple> facts;
  for (int i = 1; i < 20; ++i) facts.push_back({0, 0, i, i % 5});
  const auto g = TemporalGraph::build(facts, v);
  const Query q{0, 0, 10, Regime::extrapolation};
  const std::vector<EntityId> active{0};
  const auto a = expand_step(g, active, q, 4, 9);
  const auto b = expand_step(g, active, q, 4, 9);
  CHECK(a.size() == 4);
  CHECK(a == b);
  CHECK(std::is_sorted(a.begin(), a.end(), [](const Edge& x, const Edge& y) {
    return std::tie(x.src, x.time, x.relation, x.dst) < std::tie(y.src, y.time, y.relation, y.dst);
  }));
  CHECK(expand_step(g, active, q, 0, 9).size() == 19);
  bool differs = false;
  for (std::uint64_t s = 10; s < 20 && !differs; ++s) differs = expand_step(g, active, q, 4, s) != a;
  CHECK(differs);
}

TEST_CASE("trace dump format") {
  const auto v = testing::make_vocab(2, 1);
  const auto g = TemporalGraph::build(std::vector<Quadruple>{{0, 0, 1, 1}}, v);
  std::ostringstream out;
  write_trace(out, collect(g, Query{0, 0, 3, Regime::extrapolation}, options(v, 1, true)));
  CHECK(out.str() == "#tpar-trace v1\tquery\t0\t0\t3\textrapolation\n1\t0\t0\t1\t1\t0\n1\t0\t2\t0\t3\t1\n");
}

TEST_CASE("oracle guard") {
  const auto v = testing::make_vocab(13, 1);
  const auto g = TemporalGraph::build(std::vector<Quadruple>{{0, 0, 1, 1}}, v);
  CHECK_THROWS_AS(enumerate_paths(g, Query{0, 0, 3, Regime::interpolation}, 2), OracleGuardError);
}
