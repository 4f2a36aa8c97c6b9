#include "tpar/store.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <limits>
#include <sstream>

#include "tpar/errors.hpp"
#include "tpar/rng.hpp"

namespace tpar {

const char* to_string(Regime regime) noexcept {
  return regime == Regime::interpolation ? "interpolation" : "extrapolation";
}

const char* to_string(Granularity g) noexcept {
  switch (g) {
    case Granularity::day: return "day";
    case Granularity::year: return "year";
    case Granularity::index: return "index";
  }
  return "day";
}

Granularity parse_granularity(std::string_view text) {
  if (text == "day") return Granularity::day;
  if (text == "year") return Granularity::year;
  if (text == "index") return Granularity::index;
  throw VocabError("unknown time granularity '" + std::string(text) + "'");
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\n')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

template <class T>
bool parse_int(std::string_view s, T& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  if (ec == std::errc::result_out_of_range) throw RangeError("integer out of range: " + std::string(s));
  return ec == std::errc{} && ptr == s.data() + s.size();
}

bool is_iso_date(std::string_view s) {
  return s.size() == 10 && s[4] == '-' && s[7] == '-';
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

}  // namespace

std::int64_t parse_timestamp(std::string_view text, Granularity g) {
  text = trim(text);
  if (is_iso_date(text) && g != Granularity::index) {
    int y = 0;
    unsigned m = 0, d = 0;
    if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), m) ||
        !parse_int(text.substr(8, 2), d)) {
      throw VocabError("malformed date '" + std::string(text) + "'");
    }
    if (g == Granularity::year) return y;
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                          std::chrono::day{d}};
    if (!ymd.ok()) throw RangeError("invalid calendar date '" + std::string(text) + "'");
    return std::chrono::sys_days{ymd}.time_since_epoch().count();
  }
  std::int64_t value = 0;
  if (!parse_int(text, value)) throw VocabError("malformed timestamp '" + std::string(text) + "'");
  return value;
}

std::string format_timestamp(std::int64_t ordinal, Granularity g) {
  if (g != Granularity::day) return std::to_string(ordinal);
  const std::chrono::sys_days days{std::chrono::days{ordinal}};
  const std::chrono::year_month_day ymd{days};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

// ---------------------------------------------------------------------------
// Vocab

EntityId Vocab::intern_entity(std::string_view name) {
  const std::string key(name);
  if (auto it = entity_ids_.find(key); it != entity_ids_.end()) return it->second;
  const auto id = static_cast<EntityId>(entities_.size());
  entities_.push_back(key);
  entity_ids_.emplace(key, id);
  return id;
}

RelationId Vocab::intern_relation(std::string_view name) {
  const std::string key(name);
  if (auto it = relation_ids_.find(key); it != relation_ids_.end()) return it->second;
  if (frozen_) throw VocabError("relation vocabulary is frozen; cannot add '" + key + "'");
  if (key == kIdentityName) throw VocabError("relation name '" + key + "' is reserved");
  const auto id = static_cast<RelationId>(relations_.size());
  relations_.push_back(key);
  relation_ids_.emplace(key, id);
  return id;
}

std::optional<EntityId> Vocab::find_entity(std::string_view name) const {
  if (auto it = entity_ids_.find(std::string(name)); it != entity_ids_.end()) return it->second;
  return std::nullopt;
}

std::optional<RelationId> Vocab::find_relation(std::string_view name) const {
  if (name == kIdentityName) return identity_relation();
  if (auto it = relation_ids_.find(std::string(name)); it != relation_ids_.end()) return it->second;
  if (name.size() > kInverseSuffix.size() && name.ends_with(kInverseSuffix)) {
    const auto base = name.substr(0, name.size() - kInverseSuffix.size());
    if (auto it = relation_ids_.find(std::string(base)); it != relation_ids_.end()) {
      return it->second + num_base_relations();
    }
  }
  return std::nullopt;
}

const std::string& Vocab::entity_name(EntityId id) const {
  if (id < 0 || id >= num_entities()) throw VocabError("entity id out of range: " + std::to_string(id));
  return entities_[static_cast<std::size_t>(id)];
}

std::string Vocab::relation_name(RelationId id) const {
  if (id == identity_relation()) return std::string(kIdentityName);
  if (id >= 0 && id < num_base_relations()) return relations_[static_cast<std::size_t>(id)];
  if (is_inverse(id)) {
    return relations_[static_cast<std::size_t>(id - num_base_relations())] + std::string(kInverseSuffix);
  }
  throw VocabError("relation id out of range: " + std::to_string(id));
}

void Vocab::freeze_relations() {
  for (const auto& name : relations_) {
    const std::string inverse_spelling = name + std::string(kInverseSuffix);
    if (relation_ids_.contains(inverse_spelling)) {
      throw VocabError("base relation '" + inverse_spelling + "' collides with the inverse of '" +
                       name + "'");
    }
  }
  frozen_ = true;
}

RelationId Vocab::inverse(RelationId r) const {
  const auto base = num_base_relations();
  if (r >= 0 && r < base) return r + base;
  if (is_inverse(r)) return r - base;
  if (r == identity_relation()) return r;
  throw VocabError("relation id out of range: " + std::to_string(r));
}

std::string Vocab::format_time(TimeIndex t) const {
  return format_timestamp(t + epoch_.value_or(0), granularity_);
}

void Vocab::write(std::ostream& out) const {
  out << "#tpar-vocab v1\n";
  out << "granularity\t" << to_string(granularity_) << '\n';
  out << "epoch\t" << epoch_.value_or(0) << '\n';
  out << "entities\t" << entities_.size() << '\n';
  for (std::size_t i = 0; i < entities_.size(); ++i) out << i << '\t' << entities_[i] << '\n';
  out << "relations\t" << relations_.size() << '\n';
  for (std::size_t i = 0; i < relations_.size(); ++i) out << i << '\t' << relations_[i] << '\n';
}

Vocab Vocab::read(std::istream& in) {
  std::string line;
  auto next = [&](const char* what) -> const std::string& {
    if (!std::getline(in, line)) throw VocabError(std::string("vocab dump truncated before ") + what);
    return line;
  };
  if (next("header") != "#tpar-vocab v1") throw VocabError("unsupported vocab dump header: " + line);
  auto keyed = [&](const char* key) -> std::string {
    const auto fields = split_tabs(next(key));
    if (fields.size() != 2 || fields[0] != key) throw VocabError(std::string("expected '") + key + "' line");
    return std::string(fields[1]);
  };
  Vocab vocab(parse_granularity(keyed("granularity")));
  std::int64_t epoch = 0;
  if (!parse_int(keyed("epoch"), epoch)) throw VocabError("bad epoch");
  vocab.set_epoch(epoch);
  auto read_names = [&](const char* key, auto&& intern) {
    std::size_t count = 0;
    if (!parse_int(keyed(key), count)) throw VocabError(std::string("bad ") + key + " count");
    for (std::size_t i = 0; i < count; ++i) {
      const auto fields = split_tabs(next(key));
      std::size_t id = 0;
      if (fields.size() != 2 || !parse_int(fields[0], id) || id != i) {
        throw VocabError(std::string("bad ") + key + " entry at index " + std::to_string(i));
      }
      intern(fields[1]);
    }
  };
  read_names("entities", [&](std::string_view n) { vocab.intern_entity(n); });
  read_names("relations", [&](std::string_view n) { vocab.intern_relation(n); });
  vocab.freeze_relations();
  return vocab;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write vocab: " + path.string());
  write(out);
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("vocab not found: " + path.string());
  return read(in);
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

// Parses the four fields, returning the absolute timestamp ordinal.
std::int64_t split_quadruple(std::string_view line, std::size_t line_number, Granularity g,
                             std::string_view fields_out[3]) {
  const auto fields = split_tabs(trim(line));
  if (fields.size() != 4) {
    throw ParseError(line_number, "expected 4 tab-separated fields, found " + std::to_string(fields.size()));
  }
  for (int i = 0; i < 3; ++i) {
    if (fields[static_cast<std::size_t>(i)].empty()) throw ParseError(line_number, "empty field");
    fields_out[i] = fields[static_cast<std::size_t>(i)];
  }
  try {
    return parse_timestamp(fields[3], g);
  } catch (const RangeError& e) {
    throw RangeError("line " + std::to_string(line_number) + ": " + e.what());
  } catch (const VocabError& e) {
    throw ParseError(line_number, e.what());
  }
}

TimeIndex normalize_time(std::int64_t ordinal, std::int64_t epoch, std::size_t line_number) {
  if (ordinal < epoch) {
    throw RangeError("line " + std::to_string(line_number) + ": timestamp precedes the dataset epoch");
  }
  return ordinal - epoch;
}

}  // namespace

Quadruple parse_quadruple(std::string_view line, Vocab& vocab, Granularity g, std::size_t line_number) {
  if (!vocab.epoch()) throw VocabError("vocab has no time epoch set");
  std::string_view names[3];
  const std::int64_t ordinal = split_quadruple(line, line_number, g, names);
  Quadruple q;
  q.time = normalize_time(ordinal, *vocab.epoch(), line_number);
  q.subject = vocab.intern_entity(names[0]);
  q.relation = vocab.intern_relation(names[1]);
  q.object = vocab.intern_entity(names[2]);
  return q;
}

std::vector<Quadruple> add_inverses(std::span<const Quadruple> facts, const Vocab& vocab) {
  if (!vocab.frozen()) throw VocabError("add_inverses requires a frozen relation vocabulary");
  std::vector<Quadruple> out;
  out.reserve(2 * facts.size());
  out.assign(facts.begin(), facts.end());
  for (const auto& f : facts) {
    if (f.relation < 0 || f.relation >= vocab.num_base_relations()) {
      throw VocabError("add_inverses expects base relations only, got id " + std::to_string(f.relation));
    }
    out.push_back({f.object, vocab.inverse(f.relation), f.subject, f.time});
  }
  return out;
}

std::size_t deduplicate(std::vector<Quadruple>& facts) {
  std::unordered_set<Quadruple, QuadrupleHash> seen;
  seen.reserve(facts.size());
  const auto before = facts.size();
  std::erase_if(facts, [&](const Quadruple& q) { return !seen.insert(q).second; });
  return before - facts.size();
}

void write_quadruples(std::ostream& out, std::span<const Quadruple> facts, const Vocab& vocab) {
  for (const auto& f : facts) {
    out << vocab.entity_name(f.subject) << '\t' << vocab.relation_name(f.relation) << '\t'
        << vocab.entity_name(f.object) << '\t' << vocab.format_time(f.time) << '\n';
  }
}

namespace {

struct RawFile {
  std::vector<std::string> lines;
};

Dataset load_from_lines(std::span<const RawFile> files, Granularity g, std::optional<std::int64_t> epoch) {
  // First pass fixes the epoch so every file normalizes against the same origin.
  if (!epoch) {
    std::int64_t min_ordinal = std::numeric_limits<std::int64_t>::max();
    for (const auto& file : files) {
      for (std::size_t i = 0; i < file.lines.size(); ++i) {
        if (trim(file.lines[i]).empty()) continue;
        std::string_view names[3];
        min_ordinal = std::min(min_ordinal, split_quadruple(file.lines[i], i + 1, g, names));
      }
    }
    epoch = min_ordinal == std::numeric_limits<std::int64_t>::max() ? 0 : min_ordinal;
  }
  Dataset data;
  data.vocab = Vocab(g);
  data.vocab.set_epoch(*epoch);
  std::vector<Quadruple>* targets[3] = {&data.train, &data.valid, &data.test};
  for (std::size_t f = 0; f < files.size(); ++f) {
    for (std::size_t i = 0; i < files[f].lines.size(); ++i) {
      if (trim(files[f].lines[i]).empty()) continue;
      targets[f]->push_back(parse_quadruple(files[f].lines[i], data.vocab, g, i + 1));
    }
    data.duplicates_dropped += deduplicate(*targets[f]);
  }
  data.vocab.freeze_relations();
  return data;
}

RawFile split_lines(std::string_view text) {
  RawFile file;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    file.lines.emplace_back(text.substr(start, end - start));
    start = end + 1;
  }
  return file;
}

RawFile read_file(const std::filesystem::path& path) {
  RawFile file;
  if (path.empty()) return file;
  std::ifstream in(path);
  if (!in) throw InputError("dataset not found: " + path.string());
  std::string line;
  while (std::getline(in, line)) file.lines.push_back(line);
  return file;
}

}  // namespace

Dataset load_dataset(const DatasetPaths& paths, Granularity g, std::optional<std::int64_t> epoch) {
  const RawFile files[3] = {read_file(paths.train), read_file(paths.valid), read_file(paths.test)};
  return load_from_lines(files, g, epoch);
}

Dataset load_dataset_text(std::string_view train, std::string_view valid, std::string_view test,
                          Granularity g, std::optional<std::int64_t> epoch) {
  const RawFile files[3] = {split_lines(train), split_lines(valid), split_lines(test)};
  return load_from_lines(files, g, epoch);
}

// ---------------------------------------------------------------------------
// TemporalGraph

TemporalGraph TemporalGraph::build(std::span<const Quadruple> base_facts, const Vocab& vocab) {
  const auto directed = add_inverses(base_facts, vocab);
  return from_directed(vocab.num_entities(), directed);
}

TemporalGraph TemporalGraph::from_directed(std::int32_t num_entities, std::span<const Quadruple> facts) {
  TemporalGraph g;
  g.num_entities_ = num_entities;
  g.facts_.reserve(facts.size());
  std::vector<Quadruple> unique;
  unique.reserve(facts.size());
  for (const auto& f : facts) {
    if (f.subject < 0 || f.subject >= num_entities || f.object < 0 || f.object >= num_entities) {
      throw VocabError("fact references an entity outside [0, " + std::to_string(num_entities) + ")");
    }
    if (g.facts_.insert(f).second) unique.push_back(f);
  }
  std::sort(unique.begin(), unique.end(), [](const Quadruple& a, const Quadruple& b) {
    return std::tie(a.subject, a.time, a.relation, a.object) <
           std::tie(b.subject, b.time, b.relation, b.object);
  });
  g.offsets_.assign(static_cast<std::size_t>(num_entities) + 1, 0);
  g.links_.reserve(unique.size());
  for (const auto& f : unique) {
    ++g.offsets_[static_cast<std::size_t>(f.subject) + 1];
    g.links_.push_back({f.relation, f.object, f.time});
  }
  for (std::size_t i = 1; i < g.offsets_.size(); ++i) g.offsets_[i] += g.offsets_[i - 1];
  return g;
}

std::span<const Link> TemporalGraph::neighbors(EntityId entity, std::optional<TimeIndex> time_bound) const {
  if (entity < 0 || entity >= num_entities_) return {};
  const auto* first = links_.data() + offsets_[static_cast<std::size_t>(entity)];
  const auto* last = links_.data() + offsets_[static_cast<std::size_t>(entity) + 1];
  if (time_bound) {
    last = std::lower_bound(first, last, *time_bound,
                            [](const Link& l, TimeIndex bound) { return l.time < bound; });
  }
  return {first, last};
}

std::vector<Quadruple> TemporalGraph::facts() const {
  std::vector<Quadruple> out;
  out.reserve(links_.size());
  for (EntityId e = 0; e < num_entities_; ++e) {
    for (const auto& l : neighbors(e)) out.push_back({e, l.relation, l.object, l.time});
  }
  sort_chronologically(out);
  return out;
}

// ---------------------------------------------------------------------------
// Splits

void sort_chronologically(std::vector<Quadruple>& facts) {
  std::sort(facts.begin(), facts.end(), [](const Quadruple& a, const Quadruple& b) {
    return std::tie(a.time, a.subject, a.relation, a.object) <
           std::tie(b.time, b.subject, b.relation, b.object);
  });
}

TrainPartition split_train(std::span<const Quadruple> train, double fact_fraction, std::uint64_t seed,
                           std::span<const RelationId> query_relations) {
  if (train.empty()) throw Error("split_train: empty training set");
  if (!(fact_fraction > 0.0 && fact_fraction < 1.0)) {
    throw ConfigError("fact_fraction", "must lie strictly between 0 and 1");
  }
  std::vector<std::size_t> eligible;
  TrainPartition out;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const bool ok = query_relations.empty() ||
                    std::find(query_relations.begin(), query_relations.end(), train[i].relation) !=
                        query_relations.end();
    if (ok) eligible.push_back(i);
  }
  Rng rng(mix_seeds(seed, 0x5b17));
  rng.shuffle(eligible);
  // Small epsilon so fractions like 0.7 of 100 give 70, not 69.
  const auto n_facts = static_cast<std::size_t>(
      static_cast<double>(eligible.size()) * fact_fraction + 1e-9);
  std::vector<char> is_query(train.size(), 0);
  for (std::size_t k = n_facts; k < eligible.size(); ++k) is_query[eligible[k]] = 1;
  for (std::size_t i = 0; i < train.size(); ++i) {
    (is_query[i] ? out.queries : out.facts).push_back(train[i]);
  }
  return out;
}

void check_chronological(std::span<const Quadruple> train, std::span<const Quadruple> valid,
                         std::span<const Quadruple> test) {
  auto bounds = [](std::span<const Quadruple> s) {
    auto [lo, hi] = std::minmax_element(s.begin(), s.end(),
                                        [](const Quadruple& a, const Quadruple& b) { return a.time < b.time; });
    return std::pair{lo->time, hi->time};
  };
  std::optional<TimeIndex> previous_max;
  const std::span<const Quadruple> parts[3] = {train, valid, test};
  const char* names[3] = {"train", "valid", "test"};
  for (int i = 0; i < 3; ++i) {
    if (parts[i].empty()) continue;
    const auto [lo, hi] = bounds(parts[i]);
    if (previous_max && !(*previous_max < lo)) {
      throw RangeError(std::string("extrapolation split is not chronological: ") + names[i] +
                       " starts at time " + std::to_string(lo) + " but an earlier split reaches " +
                       std::to_string(*previous_max));
    }
    previous_max = hi;
  }
}

SplitSpec make_split_spec(const Dataset& data, Regime regime, double fact_fraction, std::uint64_t seed,
                          std::span<const RelationId> query_relations) {
  if (regime == Regime::extrapolation) check_chronological(data.train, data.valid, data.test);
  SplitSpec spec;
  spec.train = data.train;
  spec.valid = data.valid;
  spec.test = data.test;
  auto part = split_train(data.train, fact_fraction, seed, query_relations);
  spec.facts = std::move(part.facts);
  spec.queries = std::move(part.queries);
  return spec;
}

}  // namespace tpar
