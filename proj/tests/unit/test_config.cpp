#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "tpar/config.hpp"
#include "tpar/errors.hpp"

using namespace tpar;

namespace {

void check_same(const RunConfig& a, const RunConfig& b) {
  std::ostringstream x, y;
  write_config(x, a);
  write_config(y, b);
  CHECK(x.str() == y.str());
}

}  // namespace

TEST_CASE("defaults") {
  const auto c = default_config();
  CHECK(c.preset.empty());
  CHECK(c.train.max_length == 5);
  CHECK(c.train.dim == 128);
  CHECK(c.train.attn_dim == 5);
  CHECK(c.train.dropout == 0.2);
  CHECK(c.train.lr == 3e-4);
  CHECK(c.train.batch_size == 10);
  CHECK(c.granularity == Granularity::day);
  CHECK_NOTHROW(validate(c));
}

TEST_CASE("presets") {
  const auto names = preset_names();
  CHECK(names.size() == 8);
  for (const auto& n : names) {
    const auto c = preset_config(n);
    CHECK(c.preset == n);
    CHECK_NOTHROW(validate(c));
  }
  const auto y = preset_config("yago11k-interpolation");
  CHECK(y.train.activation == Activation::relu);
  CHECK(y.train.batch_size == 20);
  CHECK(y.granularity == Granularity::year);
  const auto e = preset_config("icews18-extrapolation");
  CHECK(e.train.regime == Regime::extrapolation);
  CHECK(e.train.dim == 64);
  CHECK(e.train.lr == 5e-5);
  try {
    preset_config("nope");
    FAIL("expected ConfigError");
  } catch (const ConfigError& err) {
    CHECK(err.field() == "preset");
  }
}

TEST_CASE("parse applies the preset first and overrides after") {
  const auto c = parse_config_text(
      "# comment\n"
      "lr = 0.5   # trailing comment\n"
      "\n"
      "preset = icews18-extrapolation\n"
      "query_relations = a, b\n"
      "order = strict\n");
  CHECK(c.preset == "icews18-extrapolation");
  CHECK(c.train.lr == 0.5);
  CHECK(c.train.dim == 64);
  CHECK(c.query_relations == std::vector<std::string>{"a", "b"});
  CHECK(c.train.order == ChronologicalOrder::strict);
}

TEST_CASE("parse errors name the key or line") {
  try {
    parse_config_text("dim = 4\nnot a setting\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  for (const auto& [text, key] : std::vector<std::pair<std::string, std::string>>{
           {"colour = red", "colour"}, {"dim = four", "dim"}, {"lr = 1e-3x", "lr"},
           {"self_loops = maybe", "self_loops"}, {"activation = gelu", "activation"}}) {
    try {
      parse_config_text(text);
      FAIL("expected ConfigError for " << text);
    } catch (const ConfigError& e) {
      CHECK(e.field() == key);
    }
  }
  auto c = default_config();
  c.train.dropout = 1.0;
  try {
    validate(c);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "dropout");
  }
  CHECK_THROWS_AS(load_config("/nonexistent/run.cfg"), InputError);
}

TEST_CASE("write and parse round-trip") {
  auto c = preset_config("yago-extrapolation");
  apply_setting(c, "train", "/data/train.txt");
  apply_setting(c, "lr", "0.000123456789");
  apply_setting(c, "query_relations", "x,y");
  apply_setting(c, "workers", "3");
  apply_setting(c, "dropout", "0.1");
  std::ostringstream out;
  write_config(out, c);
  auto back = parse_config_text(out.str());
  back.preset = c.preset;
  check_same(c, back);
  CHECK(back.train.lr == c.train.lr);
  CHECK(back.paths.train == c.paths.train);

  const auto path = std::filesystem::temp_directory_path() / "tpar_config_test.cfg";
  {
    std::ofstream f(path);
    f << out.str();
  }
  auto loaded = load_config(path);
  loaded.preset = c.preset;
  check_same(c, loaded);
  std::filesystem::remove(path);

  for (const auto& key : config_keys()) CHECK_FALSE(key.empty());
}

TEST_CASE("relation names resolve against the vocab") {
  const auto v = testing::make_vocab(3, 3);
  auto c = default_config();
  apply_setting(c, "query_relations", "r2,r0");
  CHECK(resolve_train_config(c, v).query_relations == std::vector<RelationId>{2, 0});
  apply_setting(c, "query_relations", "r0^-1");
  CHECK_THROWS_AS(resolve_train_config(c, v), QueryError);
  apply_setting(c, "query_relations", "missing");
  CHECK_THROWS_AS(resolve_train_config(c, v), QueryError);
}
