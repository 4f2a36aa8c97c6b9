#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "tpar/errors.hpp"
#include "tpar/pipeline.hpp"
#include "tpar/synth.hpp"

using namespace tpar;

namespace {

std::vector<Quadruple> numbered_facts(int n) {
  std::vector<Quadruple> out;
  for (int i = 0; i < n; ++i) out.push_back({i % 7, i % 3, (i + 1) % 7, i});
  return out;
}

TrainConfig tiny(Regime regime) {
  TrainConfig c;
  c.regime = regime;
  c.dim = 4;
  c.attn_dim = 2;
  c.max_length = 2;
  c.lr = 0.01;
  c.dropout = 0.0;
  c.epochs = 2;
  c.batch_size = 8;
  c.fact_fraction = 0.5;
  c.seed = 3;
  return c;
}

PipelineConfig tiny_pipeline() {
  PipelineConfig p;
  p.ratios = {0.6, 0.8};
  p.seed = 4;
  p.interpolation = tiny(Regime::interpolation);
  p.extrapolation = tiny(Regime::extrapolation);
  p.extrapolation.eval_every = 0;
  return p;
}

Dataset periodic_data(std::uint64_t seed = 1) {
  SynthSpec s;
  s.mode = BodyMode::periodic;
  s.entities = 12;
  s.chains = 3;
  s.period = 4;
  s.span = 40;
  s.seed = seed;
  return generate_synthetic(s).load();
}

}  // namespace

TEST_CASE("mask split sizes and partition") {
  const auto facts = numbered_facts(100);
  for (double ratio : {0.6, 0.7, 0.8}) {
    const auto m = mask_split(facts, ratio, 5);
    const auto keep = static_cast<std::size_t>(ratio * 100 + 0.5);
    CHECK(m.sampled.size() == keep);
    CHECK(m.incomplete.size() == 100 - keep);
    std::set<Quadruple> seen(m.sampled.begin(), m.sampled.end());
    for (const auto& q : m.incomplete) CHECK(seen.insert(q.original).second);
    CHECK(seen.size() == 100);
    CHECK(std::is_sorted(m.sampled.begin(), m.sampled.end(),
                         [](const Quadruple& a, const Quadruple& b) { return a.time < b.time; }));
    std::size_t subjects = 0;
    for (const auto& q : m.incomplete) subjects += q.mask_subject;
    CHECK(subjects > 0);
    CHECK(subjects < m.incomplete.size());
  }
  const auto a = mask_split(facts, 0.7, 5);
  const auto b = mask_split(facts, 0.7, 5);
  CHECK(a.sampled == b.sampled);
  CHECK(mask_split(facts, 0.7, 6).sampled != a.sampled);
  for (double bad : {0.0, 1.0, 1.5, -0.1}) CHECK_THROWS_AS(mask_split(facts, bad, 1), ConfigError);
}

TEST_CASE("completion fills only the masked side") {
  const auto data = periodic_data();
  const auto split = mask_split(data.train, 0.7, 2);
  const auto cfg = tiny(Regime::interpolation);
  const auto params = ModelParams::init(cfg.model_dims(data.vocab), 1, time_span(data));
  const auto graph = TemporalGraph::build(split.sampled, data.vocab);
  const auto f = cfg.frontier(data.vocab);
  const auto all = complete(params, graph, split.incomplete, data.vocab, f);
  REQUIRE(all.size() == split.incomplete.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& m = split.incomplete[i];
    const auto& c = all[i];
    CHECK(c.fact.predicted);
    CHECK(c.fact.fact.relation == m.original.relation);
    CHECK(c.fact.fact.time == m.original.time);
    if (m.mask_subject) CHECK(c.fact.fact.object == m.original.object);
    else CHECK(c.fact.fact.subject == m.original.subject);
    CHECK(c.matches_original == (c.fact.fact == m.original));
    const auto task = candidates(m.original, data.vocab, Regime::interpolation)[m.mask_subject ? 1 : 0];
    const auto scores = model_scores(params, graph, task.query, f);
    CHECK(c.score == *std::max_element(scores.begin(), scores.end()));
  }
  const auto parallel = complete(params, graph, split.incomplete, data.vocab, f, 3);
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(parallel[i].fact.fact == all[i].fact.fact);
  const double cut = all[all.size() / 2].score;
  const auto kept = complete(params, graph, split.incomplete, data.vocab, f, 1, cut);
  for (const auto& c : kept) CHECK(c.score >= cut);
  CHECK(kept.size() <= all.size());
}

TEST_CASE("merge is chronological with provenance") {
  const std::vector<Quadruple> sampled{{0, 0, 1, 5}, {1, 0, 2, 1}};
  std::vector<Completion> comps(3);
  comps[0].fact = {{2, 0, 3, 3}, true};
  comps[1].fact = {{0, 0, 1, 5}, true};  // duplicates an observed fact
  comps[2].fact = {{2, 0, 3, 0}, true};
  const auto merged = merge_chronologically(sampled, comps);
  REQUIRE(merged.size() == 4);
  for (std::size_t i = 1; i < merged.size(); ++i) CHECK(merged[i - 1].fact.time <= merged[i].fact.time);
  for (const auto& f : merged) {
    const bool observed = std::find(sampled.begin(), sampled.end(), f.fact) != sampled.end();
    CHECK(f.predicted != observed);
  }
  std::ostringstream out;
  write_merged_facts(out, merged, testing::make_vocab(4, 1));
  CHECK(out.str().find("\tpredicted\n") != std::string::npos);
  CHECK(out.str().find("\tobserved\n") != std::string::npos);
}

TEST_CASE("pipeline config validation") {
  auto p = tiny_pipeline();
  CHECK_NOTHROW(p.validate());
  p.ratios = {0.6, 1.0};
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = tiny_pipeline();
  p.ratios.clear();
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = tiny_pipeline();
  p.extrapolation.regime = Regime::interpolation;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("pipeline runs, is deterministic and never trains on test") {
  const auto data = periodic_data();
  const auto cfg = tiny_pipeline();
  std::ostringstream log;
  const auto a = run_pipeline(data, cfg, &log);
  CHECK(a.early_test_reads == 0);
  REQUIRE(a.rows.size() == 4);
  REQUIRE(a.merged.size() == 2);
  for (const auto& row : a.rows) {
    CHECK(row.metrics.count == 2 * data.test.size());
    CHECK(row.metrics.mrr > 0.0);
    if (!row.interpolation) CHECK(row.completed == 0);
  }
  CHECK(a.rows[0].train_facts >= a.rows[1].train_facts);
  CHECK(log.str().find("\"stage\":\"test\"") != std::string::npos);

  const auto b = run_pipeline(data, cfg);
  std::ostringstream ta, tb;
  write_pipeline_tsv(ta, a);
  write_pipeline_tsv(tb, b);
  CHECK(ta.str() == tb.str());

  // Swapping the test split leaves every trained stage untouched.
  auto other = data;
  for (auto& q : other.test) q.object = (q.object + 1) % other.vocab.num_entities();
  const auto c = run_pipeline(other, cfg);
  REQUIRE(c.merged.size() == a.merged.size());
  for (std::size_t i = 0; i < a.merged.size(); ++i) {
    REQUIRE(c.merged[i].size() == a.merged[i].size());
    for (std::size_t j = 0; j < a.merged[i].size(); ++j) {
      CHECK(c.merged[i][j].fact == a.merged[i][j].fact);
      CHECK(c.merged[i][j].predicted == a.merged[i][j].predicted);
    }
  }
  std::ostringstream table;
  write_pipeline_table(table, a);
  CHECK(table.str().find("  A  ") != std::string::npos);
}

TEST_CASE("pipeline rejects unusable data") {
  auto data = periodic_data();
  data.test.clear();
  CHECK_THROWS_AS(run_pipeline(data, tiny_pipeline()), InputError);
}
