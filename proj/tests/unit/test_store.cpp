#include <doctest.h>

#include <tuple>

#include <algorithm>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "tpar/errors.hpp"
#include "tpar/store.hpp"

using namespace tpar;

namespace {

Vocab day_vocab(const char* epoch) {
  Vocab v(Granularity::day);
  v.set_epoch(parse_timestamp(epoch, Granularity::day));
  return v;
}

}  // namespace

TEST_CASE("parse_quadruple normalizes day timestamps to the epoch") {
  auto v = day_vocab("2014-01-01");
  const auto q = parse_quadruple("A\tvisits\tB\t2014-01-02", v, Granularity::day);
  CHECK(q.subject == *v.find_entity("A"));
  CHECK(q.relation == *v.find_relation("visits"));
  CHECK(q.object == *v.find_entity("B"));
  CHECK(q.time == 1);
  CHECK(parse_quadruple("A\tvisits\tB\t2014-01-01", v, Granularity::day).time == 0);
  // Leap day and a month boundary.
  CHECK(parse_quadruple("A\tvisits\tB\t2014-03-01", v, Granularity::day).time == 59);
  CHECK(parse_quadruple("A\tvisits\tB\t2016-03-01", v, Granularity::day).time == 790);
}

TEST_CASE("parse_quadruple errors") {
  auto v = day_vocab("2014-01-01");
  SUBCASE("wrong field count carries the line number") {
    try {
      parse_quadruple("A\tvisits\tB", v, Granularity::day, 17);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 17);
    }
  }
  SUBCASE("malformed timestamp") { CHECK_THROWS_AS(parse_quadruple("A\tr\tB\t20x4-01-01", v, Granularity::day, 3), ParseError); }
  SUBCASE("impossible date") { CHECK_THROWS_AS(parse_quadruple("A\tr\tB\t2014-02-30", v, Granularity::day), RangeError); }
  SUBCASE("before the epoch") { CHECK_THROWS_AS(parse_quadruple("A\tr\tB\t2013-12-31", v, Granularity::day), RangeError); }
  SUBCASE("integer overflow") {
    CHECK_THROWS_AS(parse_quadruple("A\tr\tB\t99999999999999999999999", v, Granularity::index), RangeError);
  }
}

TEST_CASE("year granularity truncates month and day") {
  Vocab v(Granularity::year);
  v.set_epoch(1990);
  CHECK(parse_quadruple("A\tr\tB\t1995-07-14", v, Granularity::year).time == 5);
  CHECK(parse_quadruple("A\tr\tB\t1995", v, Granularity::year).time == 5);
  CHECK(v.format_time(5) == "1995");
}

TEST_CASE("vocab invariants") {
  auto v = testing::make_vocab(3, 4);
  CHECK(v.num_relations() == 8);
  CHECK(v.identity_relation() == 8);
  CHECK(v.relation_table_size() == 9);
  for (RelationId r = 0; r < v.num_relations(); ++r) CHECK(v.inverse(v.inverse(r)) == r);
  CHECK(v.inverse(1) == 5);
  CHECK(v.relation_name(5) == "r1^-1");
  CHECK(v.find_relation("r1^-1") == 5);
  CHECK(v.find_relation("IDENTITY") == 8);
  CHECK_FALSE(v.find_entity("nobody"));
  CHECK_THROWS_AS(v.intern_relation("late"), VocabError);

  Vocab clash(Granularity::index);
  clash.intern_relation("x");
  clash.intern_relation("x^-1");
  CHECK_THROWS_AS(clash.freeze_relations(), VocabError);
}

TEST_CASE("vocab dump round-trips") {
  auto v = testing::make_vocab(4, 2);
  v.set_epoch(12);
  std::stringstream buf;
  v.write(buf);
  CHECK(buf.str().rfind("#tpar-vocab v1", 0) == 0);
  const auto back = Vocab::read(buf);
  CHECK(back.num_entities() == 4);
  CHECK(back.num_base_relations() == 2);
  CHECK(back.epoch() == 12);
  CHECK(back.granularity() == Granularity::index);
  for (EntityId e = 0; e < 4; ++e) CHECK(back.entity_name(e) == v.entity_name(e));
  CHECK(back.frozen());
}

TEST_CASE("add_inverses") {
  Vocab v = testing::make_vocab(8, 230);
  const std::vector<Quadruple> one{{0, 5, 3, 7}};
  const auto out = add_inverses(one, v);
  REQUIRE(out.size() == 2);
  CHECK(out[0] == Quadruple{0, 5, 3, 7});
  CHECK(out[1] == Quadruple{3, 235, 0, 7});
  CHECK(add_inverses(std::vector<Quadruple>{}, v).empty());
  const std::vector<Quadruple> inv{{0, 235, 3, 7}};
  CHECK_THROWS_AS(add_inverses(inv, v), VocabError);
}

TEST_CASE("dataset round-trip reproduces the fact multiset") {
  const std::string train =
      "A\tr\tB\t2014-01-01\nB\ts\tC\t2014-01-03\nA\tr\tB\t2014-01-01\nC\tr\tA\t2014-02-10\n";
  const auto data = load_dataset_text(train, "", "", Granularity::day);
  CHECK(data.duplicates_dropped == 1);
  CHECK(data.train.size() == 3);
  std::ostringstream out;
  write_quadruples(out, data.train, data.vocab);
  CHECK(out.str() == "A\tr\tB\t2014-01-01\nB\ts\tC\t2014-01-03\nC\tr\tA\t2014-02-10\n");
  const auto again = load_dataset_text(out.str(), "", "", Granularity::day);
  CHECK(again.train == data.train);
}

TEST_CASE("missing dataset file") {
  DatasetPaths p{"/nonexistent/train.txt", "", ""};
  try {
    load_dataset(p, Granularity::day);
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()) == "dataset not found: /nonexistent/train.txt");
  }
}

TEST_CASE("neighbors time cuts") {
  auto v = testing::make_vocab(3, 1);
  const std::vector<Quadruple> facts{{0, 0, 1, 1}, {0, 0, 2, 5}, {0, 0, 1, 9}};
  const auto g = TemporalGraph::build(facts, v);
  CHECK(g.neighbors(0).size() == 3);
  const auto b5 = g.neighbors(0, 5);
  REQUIRE(b5.size() == 1);
  CHECK(b5[0].time == 1);
  CHECK(g.neighbors(0, 1).empty());
  CHECK(g.neighbors(42).empty());
  CHECK(g.neighbors(-1).empty());
}

TEST_CASE("graph properties on random graphs") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const auto v = testing::make_vocab(7, 3);
    const auto facts = testing::random_facts(rng, {7, 3, 25, 12});
    const auto g = TemporalGraph::build(facts, v);
    // Inverse closure.
    for (const auto& f : g.facts()) CHECK(g.contains({f.object, v.inverse(f.relation), f.subject, f.time}));
    for (EntityId e = 0; e < 7; ++e) {
      const auto all = g.neighbors(e);
      CHECK(std::is_sorted(all.begin(), all.end(), [](const Link& a, const Link& b) {
        return std::tie(a.time, a.relation, a.object) < std::tie(b.time, b.relation, b.object);
      }));
      for (TimeIndex b = 0; b <= 13; ++b) {
        std::vector<Link> filtered;
        for (const auto& l : all) {
          if (l.time < b) filtered.push_back(l);
        }
        const auto cut = g.neighbors(e, b);
        CHECK(std::vector<Link>(cut.begin(), cut.end()) == filtered);
      }
    }
  }
}

TEST_CASE("split_train sizes and determinism") {
  Rng rng(1);
  std::vector<Quadruple> train;
  for (int i = 0; i < 100; ++i) train.push_back({i % 10, 0, (i + 1) % 10, i});
  const auto p = split_train(train, 0.75, 17);
  CHECK(p.facts.size() == 75);
  CHECK(p.queries.size() == 25);
  const auto again = split_train(train, 0.75, 17);
  CHECK(again.facts == p.facts);
  CHECK(again.queries == p.queries);
  std::multiset<Quadruple> joined(p.facts.begin(), p.facts.end());
  joined.insert(p.queries.begin(), p.queries.end());
  CHECK(joined == std::multiset<Quadruple>(train.begin(), train.end()));
  for (const auto& q : p.queries) CHECK(std::find(p.facts.begin(), p.facts.end(), q) == p.facts.end());

  const std::vector<Quadruple> four(train.begin(), train.begin() + 4);
  const auto small = split_train(four, 0.75, 3);
  CHECK(small.facts.size() == 3);
  CHECK(small.queries.size() == 1);
  CHECK_THROWS(split_train(std::vector<Quadruple>{}, 0.75, 1));
  CHECK_THROWS(split_train(train, 1.0, 1));
}

TEST_CASE("split_train with query relations keeps other relations as facts") {
  std::vector<Quadruple> train;
  for (int i = 0; i < 40; ++i) train.push_back({i % 5, i % 2, (i + 1) % 5, i});
  const std::vector<RelationId> only{1};
  const auto p = split_train(train, 0.5, 4, only);
  CHECK(p.queries.size() == 10);
  for (const auto& q : p.queries) CHECK(q.relation == 1);
  CHECK(p.facts.size() == 30);
}

TEST_CASE("chronological split check") {
  const std::vector<Quadruple> train{{0, 0, 1, 1}, {0, 0, 1, 3}};
  const std::vector<Quadruple> valid{{0, 0, 1, 4}};
  const std::vector<Quadruple> test{{0, 0, 1, 6}};
  CHECK_NOTHROW(check_chronological(train, valid, test));
  const std::vector<Quadruple> overlap{{0, 0, 1, 3}};
  CHECK_THROWS_AS(check_chronological(train, overlap, test), RangeError);
  CHECK_THROWS_AS(check_chronological(train, valid, overlap), RangeError);
}
