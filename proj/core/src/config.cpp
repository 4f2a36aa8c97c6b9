#include "tpar/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "tpar/errors.hpp"

namespace tpar {

namespace {

struct Preset {
  const char* name;
  Regime regime;
  double lr;
  int batch;
  Activation activation;
  int dim;
  Granularity granularity;
};

constexpr Preset kPresets[] = {
    {"icews14-interpolation", Regime::interpolation, 3e-4, 10, Activation::identity, 128, Granularity::day},
    {"icews05-15-interpolation", Regime::interpolation, 5e-5, 5, Activation::identity, 128, Granularity::day},
    {"yago11k-interpolation", Regime::interpolation, 5e-5, 20, Activation::relu, 128, Granularity::year},
    {"wikidata12k-interpolation", Regime::interpolation, 2e-5, 20, Activation::relu, 128, Granularity::year},
    {"icews14-extrapolation", Regime::extrapolation, 3e-4, 10, Activation::identity, 128, Granularity::day},
    {"icews18-extrapolation", Regime::extrapolation, 5e-5, 5, Activation::relu, 64, Granularity::day},
    {"yago-extrapolation", Regime::extrapolation, 3e-5, 10, Activation::identity, 64, Granularity::year},
    {"wiki-extrapolation", Regime::extrapolation, 3e-5, 5, Activation::identity, 64, Granularity::year},
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(std::string(key), "expected a number, got '" + std::string(value) + "'");
  }
  return out;
}

double parse_double(std::string_view key, std::string_view value) {
  std::string copy(value);
  char* end = nullptr;
  const double out = std::strtod(copy.c_str(), &end);
  if (copy.empty() || end != copy.c_str() + copy.size()) {
    throw ConfigError(std::string(key), "expected a number, got '" + copy + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError(std::string(key), "expected true or false, got '" + std::string(value) + "'");
}

Regime parse_regime(std::string_view value) {
  if (value == "interpolation") return Regime::interpolation;
  if (value == "extrapolation") return Regime::extrapolation;
  throw ConfigError("regime", "expected interpolation or extrapolation, got '" + std::string(value) + "'");
}

ChronologicalOrder parse_order(std::string_view value) {
  if (value == "relaxed") return ChronologicalOrder::relaxed;
  if (value == "strict") return ChronologicalOrder::strict;
  throw ConfigError("order", "expected relaxed or strict, got '" + std::string(value) + "'");
}

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    const auto comma = value.find(',', start);
    const auto item = trim(value.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

using Setter = void (*)(RunConfig&, std::string_view);

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"regime", [](RunConfig& c, std::string_view v) { c.train.regime = parse_regime(v); }},
      {"train", [](RunConfig& c, std::string_view v) { c.paths.train = std::string(v); }},
      {"valid", [](RunConfig& c, std::string_view v) { c.paths.valid = std::string(v); }},
      {"test", [](RunConfig& c, std::string_view v) { c.paths.test = std::string(v); }},
      {"granularity",
       [](RunConfig& c, std::string_view v) {
         try {
           c.granularity = parse_granularity(v);
         } catch (const Error& e) {
           throw ConfigError("granularity", e.what());
         }
       }},
      {"dim", [](RunConfig& c, std::string_view v) { c.train.dim = parse_number<int>("dim", v); }},
      {"attn_dim", [](RunConfig& c, std::string_view v) { c.train.attn_dim = parse_number<int>("attn_dim", v); }},
      {"max_length", [](RunConfig& c, std::string_view v) { c.train.max_length = parse_number<int>("max_length", v); }},
      {"activation", [](RunConfig& c, std::string_view v) { c.train.activation = parse_activation(v); }},
      {"shared_relations",
       [](RunConfig& c, std::string_view v) { c.train.shared_relations = parse_bool("shared_relations", v); }},
      {"scalar_time", [](RunConfig& c, std::string_view v) { c.train.scalar_time = parse_bool("scalar_time", v); }},
      {"lr", [](RunConfig& c, std::string_view v) { c.train.lr = parse_double("lr", v); }},
      {"batch_size", [](RunConfig& c, std::string_view v) { c.train.batch_size = parse_number<int>("batch_size", v); }},
      {"dropout", [](RunConfig& c, std::string_view v) { c.train.dropout = parse_double("dropout", v); }},
      {"epochs", [](RunConfig& c, std::string_view v) { c.train.epochs = parse_number<int>("epochs", v); }},
      {"patience", [](RunConfig& c, std::string_view v) { c.train.patience = parse_number<int>("patience", v); }},
      {"eval_every", [](RunConfig& c, std::string_view v) { c.train.eval_every = parse_number<int>("eval_every", v); }},
      {"seed", [](RunConfig& c, std::string_view v) { c.train.seed = parse_number<std::uint64_t>("seed", v); }},
      {"split_seed",
       [](RunConfig& c, std::string_view v) { c.train.split_seed = parse_number<std::uint64_t>("split_seed", v); }},
      {"fact_fraction",
       [](RunConfig& c, std::string_view v) { c.train.fact_fraction = parse_double("fact_fraction", v); }},
      {"query_relations", [](RunConfig& c, std::string_view v) { c.query_relations = split_list(v); }},
      {"valid_limit",
       [](RunConfig& c, std::string_view v) { c.train.valid_limit = parse_number<std::size_t>("valid_limit", v); }},
      {"self_loops", [](RunConfig& c, std::string_view v) { c.train.self_loops = parse_bool("self_loops", v); }},
      {"degree_cap", [](RunConfig& c, std::string_view v) { c.train.degree_cap = parse_number<int>("degree_cap", v); }},
      {"order", [](RunConfig& c, std::string_view v) { c.train.order = parse_order(v); }},
      {"workers", [](RunConfig& c, std::string_view v) { c.train.workers = parse_number<int>("workers", v); }},
  };
  return table;
}

void apply_preset(RunConfig& c, const Preset& p) {
  c.preset = p.name;
  c.train.regime = p.regime;
  c.train.lr = p.lr;
  c.train.batch_size = p.batch;
  c.train.activation = p.activation;
  c.train.dim = p.dim;
  c.granularity = p.granularity;
}

// Shortest text that parses back to the same double.
std::string shortest(double x) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general);
  return std::string(buf, end);
}

}  // namespace

RunConfig default_config() {
  RunConfig c;
  c.train.max_length = 5;
  c.train.attn_dim = 5;
  c.train.dropout = 0.2;
  c.train.fact_fraction = 0.75;
  c.train.workers = 0;
  apply_preset(c, kPresets[0]);
  c.preset.clear();
  return c;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& p : kPresets) out.emplace_back(p.name);
  return out;
}

RunConfig preset_config(std::string_view name) {
  for (const auto& p : kPresets) {
    if (name == p.name) {
      RunConfig c = default_config();
      apply_preset(c, p);
      return c;
    }
  }
  throw ConfigError("preset", "unknown preset '" + std::string(name) + "'");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out{"preset"};
  for (const auto& [k, _] : setters()) out.push_back(k);
  return out;
}

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
  const auto v = trim(value);
  if (key == "preset") {
    auto fresh = preset_config(v);
    fresh.paths = config.paths;
    config = std::move(fresh);
    return;
  }
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError(std::string(key), "unknown configuration key");
  it->second(config, v);
}

RunConfig parse_config(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> settings;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto text = trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ParseError(line_number, "expected key = value");
    auto key = trim(std::string_view(text).substr(0, eq));
    if (key.empty()) throw ParseError(line_number, "empty key");
    settings.emplace_back(std::move(key), trim(std::string_view(text).substr(eq + 1)));
  }
  RunConfig config = default_config();
  for (const auto& [k, v] : settings) {
    if (k == "preset") config = preset_config(v);
  }
  for (const auto& [k, v] : settings) {
    if (k != "preset") apply_setting(config, k, v);
  }
  return config;
}

RunConfig parse_config_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_config(in);
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("config not found: " + path.string());
  return parse_config(in);
}

void validate(const RunConfig& config) {
  config.train.validate();
  for (const auto& name : config.query_relations) {
    if (name.empty()) throw ConfigError("query_relations", "empty relation name");
  }
}

void write_config(std::ostream& out, const RunConfig& c) {
  const auto& t = c.train;
  auto line = [&](const char* key, const auto& value) { out << key << " = " << value << '\n'; };
  if (!c.preset.empty()) line("# preset", c.preset);
  line("regime", to_string(t.regime));
  line("train", c.paths.train.string());
  line("valid", c.paths.valid.string());
  line("test", c.paths.test.string());
  line("granularity", to_string(c.granularity));
  line("dim", t.dim);
  line("attn_dim", t.attn_dim);
  line("max_length", t.max_length);
  line("activation", to_string(t.activation));
  line("shared_relations", t.shared_relations ? "true" : "false");
  line("scalar_time", t.scalar_time ? "true" : "false");
  line("lr", shortest(t.lr));
  line("batch_size", t.batch_size);
  line("dropout", shortest(t.dropout));
  line("epochs", t.epochs);
  line("patience", t.patience);
  line("eval_every", t.eval_every);
  line("seed", t.seed);
  line("split_seed", t.split_seed);
  line("fact_fraction", shortest(t.fact_fraction));
  std::string rels;
  for (const auto& r : c.query_relations) rels += (rels.empty() ? "" : ",") + r;
  line("query_relations", rels);
  line("valid_limit", t.valid_limit);
  line("self_loops", t.self_loops ? "true" : "false");
  line("degree_cap", t.degree_cap);
  line("order", t.order == ChronologicalOrder::strict ? "strict" : "relaxed");
  line("workers", t.workers);
}

TrainConfig resolve_train_config(const RunConfig& config, const Vocab& vocab) {
  TrainConfig t = config.train;
  t.query_relations.clear();
  for (const auto& name : config.query_relations) {
    const auto id = vocab.find_relation(name);
    if (!id || *id >= vocab.num_base_relations()) throw QueryError("unknown base relation in query_relations: " + name);
    t.query_relations.push_back(*id);
  }
  return t;
}

}  // namespace tpar
