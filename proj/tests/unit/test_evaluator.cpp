#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "tpar/errors.hpp"
#include "tpar/evaluator.hpp"
#include "tpar/synth.hpp"
#include "tpar/train.hpp"

using namespace tpar;

TEST_CASE("candidates") {
  const auto v = testing::make_vocab(5, 230);
  const auto tasks = candidates({1, 7, 3, 9}, v, Regime::interpolation);
  CHECK(tasks[0].query == Query{1, 7, 9, Regime::interpolation, 3});
  CHECK(tasks[0].gold == 3);
  CHECK(tasks[1].query.entity == 3);
  CHECK(tasks[1].query.relation == 237);
  CHECK(tasks[1].gold == 1);
  CHECK(tasks[1].subject_side);
  // Each task ranks every entity.
  std::size_t scored = 0;
  const std::vector<Quadruple> one{{1, 7, 3, 9}};
  const auto filter = FilterIndex::build(std::vector<std::span<const Quadruple>>{one}, v);
  evaluate_with(one, filter, v, {}, [&](const RankingTask&) {
    scored += 5;
    return std::vector<double>(5, 0.0);
  });
  CHECK(scored == 10);
}

TEST_CASE("filtered rank examples") {
  CHECK(filtered_rank(std::vector<double>{0.1, 0.9, 0.3}, 1, {}) == 1);
  // gold = 0 (1.0), a = 1 (2.0, filtered), b = 2 (0.5)
  CHECK(filtered_rank(std::vector<double>{1.0, 2.0, 0.5}, 0, std::vector<EntityId>{1}) == 1);
  CHECK(filtered_rank(std::vector<double>{1.0, 2.0, 0.5}, 0, {}) == 2);
  // 3-way tie including the gold: mean rank 2.
  CHECK(filtered_rank(std::vector<double>{0.5, 0.5, 0.5}, 1, {}) == 2);
  // 2-way tie: mean 1.5 rounds up to 2; 4-way tie: 2.5 -> 3.
  CHECK(filtered_rank(std::vector<double>{0.5, 0.5}, 0, {}) == 2);
  CHECK(filtered_rank(std::vector<double>{0.5, 0.5, 0.5, 0.5, 0.1}, 3, {}) == 3);
  // The gold is never filtered.
  CHECK(filtered_rank(std::vector<double>{0.1, 0.9}, 0, std::vector<EntityId>{0}) == 2);
}

TEST_CASE("filtered rank matches the naive reference") {
  Rng rng(123);
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 1 + static_cast<int>(rng.bounded(25));
    std::vector<double> scores(static_cast<std::size_t>(n));
    const int levels = 1 + static_cast<int>(rng.bounded(5));
    for (auto& s : scores) s = static_cast<double>(rng.bounded(static_cast<std::uint64_t>(levels)));
    const auto gold = static_cast<EntityId>(rng.bounded(static_cast<std::uint64_t>(n)));
    std::vector<EntityId> filtered;
    for (EntityId e = 0; e < n; ++e) {
      if (rng.bernoulli(0.3)) filtered.push_back(e);
    }
    const auto r = filtered_rank(scores, gold, filtered);
    CHECK(r == testing::naive_filtered_rank(scores, gold, filtered));
    // Filter soundness: removing the filter never lowers the rank number.
    CHECK(filtered_rank(scores, gold, {}) >= r);
  }
}

TEST_CASE("metrics arithmetic and bounds") {
  const std::vector<std::int64_t> ranks{1, 2, 4};
  const auto m = metrics_from_ranks(ranks);
  CHECK(m.mrr == 7.0 / 12.0);
  CHECK(m.hits1 == doctest::Approx(1.0 / 3));
  CHECK(m.hits3 == doctest::Approx(2.0 / 3));
  CHECK(m.hits10 == 1.0);
  CHECK(m.count == 3);
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::int64_t> rs(1 + rng.bounded(30));
    for (auto& r : rs) r = 1 + static_cast<std::int64_t>(rng.bounded(40));
    const auto x = metrics_from_ranks(rs);
    CHECK(x.hits1 <= x.hits3);
    CHECK(x.hits3 <= x.hits10);
    CHECK(x.hits10 <= 1.0);
    CHECK(x.mrr > 0.0);
    CHECK(x.mrr <= 1.0);
    CHECK(x.mrr >= x.hits1);
  }
}

TEST_CASE("filter index is time-wise and includes inverses") {
  const auto v = testing::make_vocab(4, 2);
  const std::vector<Quadruple> train{{0, 0, 1, 3}, {0, 0, 2, 3}, {0, 0, 3, 4}};
  const std::vector<Quadruple> test{{0, 1, 2, 5}};
  const auto f = FilterIndex::build(std::vector<std::span<const Quadruple>>{train, test}, v);
  CHECK(std::vector<EntityId>(f.answers(0, 0, 3).begin(), f.answers(0, 0, 3).end()) == std::vector<EntityId>{1, 2});
  CHECK(f.answers(0, 0, 5).empty());
  CHECK(f.answers_any_time(0, 0).size() == 3);
  CHECK(f.answers(2, v.inverse(1), 5).size() == 1);
  for (const auto& q : test) CHECK(f.contains(q));
}

TEST_CASE("oracle and random scorers") {
  SynthSpec spec;
  spec.seed = 3;
  const auto data = generate_synthetic(spec).load();
  const auto filter = evaluation_filter(data, true);
  EvalOptions opts;
  opts.regime = Regime::extrapolation;
  const auto perfect = evaluate_with(data.test, filter, data.vocab, opts, [&](const RankingTask& t) {
    std::vector<double> s(static_cast<std::size_t>(data.vocab.num_entities()), 0.0);
    s[static_cast<std::size_t>(t.gold)] = 1.0;
    return s;
  });
  CHECK(perfect.metrics.mrr == 1.0);
  CHECK(perfect.metrics.hits1 == 1.0);
  CHECK(perfect.metrics.hits10 == 1.0);
  CHECK(perfect.metrics.count == 2 * data.test.size());

  Rng rng(17);
  double total = 0.0;
  const int trials = 40;
  for (int k = 0; k < trials; ++k) {
    total += evaluate_with(data.test, filter, data.vocab, opts, [&](const RankingTask&) {
      std::vector<double> s(static_cast<std::size_t>(data.vocab.num_entities()));
      for (auto& x : s) x = rng.uniform01();
      return s;
    }).metrics.mrr;
  }
  // Few same-time answers in this data, so the unfiltered expectation applies.
  CHECK(total / trials == doctest::Approx(testing::harmonic_mean_rr(data.vocab.num_entities())).epsilon(0.1));
  CHECK(testing::harmonic_mean_rr(30) == doctest::Approx(0.133166237697346369).epsilon(1e-15));
}

TEST_CASE("evaluate rejects empty splits and mismatched models") {
  const auto v = testing::make_vocab(3, 1);
  const FilterIndex f;
  CHECK_THROWS_AS(evaluate_with(std::vector<Quadruple>{}, f, v, {}, [](const RankingTask&) { return std::vector<double>(3); }),
                  InputError);
  ModelDims dims;
  dims.num_entities = 4;
  dims.num_base_relations = 1;
  dims.dim = 2;
  dims.max_length = 1;
  const auto params = ModelParams::init(dims, 1);
  const auto g = TemporalGraph::build(std::vector<Quadruple>{{0, 0, 1, 1}}, v);
  CHECK_THROWS_AS(evaluate(params, g, std::vector<Quadruple>{{0, 0, 1, 1}}, f, v, {}), CheckpointError);
}

TEST_CASE("untrained model evaluation with both time filters") {
  SynthSpec spec;
  spec.seed = 4;
  spec.span = 60;
  const auto data = generate_synthetic(spec).load();
  ModelDims dims;
  dims.num_entities = data.vocab.num_entities();
  dims.num_base_relations = data.vocab.num_base_relations();
  dims.dim = 8;
  dims.max_length = 2;
  const auto params = ModelParams::init(dims, 2, time_span(data));
  const auto graph = evaluation_background(data, Regime::extrapolation, true);
  const auto filter = evaluation_filter(data, true);
  EvalOptions opts;
  opts.regime = Regime::extrapolation;
  opts.frontier.identity_relation = data.vocab.identity_relation();
  const auto wise = evaluate(params, graph, data.test, filter, data.vocab, opts);
  opts.time_unwise_filter = true;
  const auto raw = evaluate(params, graph, data.test, filter, data.vocab, opts);
  REQUIRE(wise.ranks.size() == raw.ranks.size());
  for (std::size_t i = 0; i < wise.ranks.size(); ++i) CHECK(raw.ranks[i].rank <= wise.ranks[i].rank);
  CHECK(wise.traces_checked == wise.ranks.size());

  std::ostringstream dump, record, table;
  write_rank_dump(dump, wise.ranks, data.vocab);
  CHECK(dump.str().rfind("subject\trelation\tobject\ttime\tside\tgold\ttop\trank\n", 0) == 0);
  write_metrics_record(record, wise.metrics, "test");
  CHECK(record.str().find("\"mrr\":") != std::string::npos);
  CHECK(record.str().back() == '\n');
  write_metrics_table(table, wise.metrics, "test");
  CHECK(table.str().find("Hits@10") != std::string::npos);
}
