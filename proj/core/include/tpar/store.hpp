#pragma once

// Temporal KG storage: vocabulary interning, TSV quadruple parsing, inverse
// materialization, time-sorted adjacency and the training fact/query split.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tpar/types.hpp"

namespace tpar {

enum class Granularity { day, year, index };

const char* to_string(Granularity g) noexcept;
Granularity parse_granularity(std::string_view text);

// Parses a timestamp into an absolute ordinal in granularity units: days since
// 1970-01-01 for `day`, the calendar year for `year`, the raw integer for
// `index`. Year granularity truncates ISO dates to their year.
std::int64_t parse_timestamp(std::string_view text, Granularity g);
std::string format_timestamp(std::int64_t ordinal, Granularity g);

// Name <-> id maps for entities and relations.
//
// Base relations get ids [0, R) in first-seen order. Once frozen, the inverse
// of r is r + R and the reserved IDENTITY relation (self-loops) is 2R.
class Vocab {
 public:
  static constexpr std::string_view kInverseSuffix = "^-1";
  static constexpr std::string_view kIdentityName = "IDENTITY";

  Vocab() = default;
  explicit Vocab(Granularity g) : granularity_(g) {}

  EntityId intern_entity(std::string_view name);
  RelationId intern_relation(std::string_view name);

  std::optional<EntityId> find_entity(std::string_view name) const;
  // Accepts base names, "<name>^-1" for inverses, and IDENTITY.
  std::optional<RelationId> find_relation(std::string_view name) const;

  const std::string& entity_name(EntityId id) const;
  std::string relation_name(RelationId id) const;

  // Rejects base names that collide with another base name's inverse
  // spelling, then fixes R.
  void freeze_relations();
  bool frozen() const noexcept { return frozen_; }

  std::int32_t num_entities() const noexcept { return static_cast<std::int32_t>(entities_.size()); }
  std::int32_t num_base_relations() const noexcept { return static_cast<std::int32_t>(relations_.size()); }
  // Base plus inverse relations (2R).
  std::int32_t num_relations() const noexcept { return 2 * num_base_relations(); }
  RelationId identity_relation() const noexcept { return num_relations(); }
  // Rows of a relation embedding table: 2R + 1.
  std::int32_t relation_table_size() const noexcept { return num_relations() + 1; }

  RelationId inverse(RelationId r) const;
  bool is_inverse(RelationId r) const noexcept {
    return r >= num_base_relations() && r < num_relations();
  }

  Granularity granularity() const noexcept { return granularity_; }
  void set_granularity(Granularity g) noexcept { granularity_ = g; }
  std::optional<std::int64_t> epoch() const noexcept { return epoch_; }
  void set_epoch(std::int64_t ordinal) noexcept { epoch_ = ordinal; }

  // Renders a normalized time index back into the dataset's timestamp format.
  std::string format_time(TimeIndex t) const;

  // Textual dump, first line "#tpar-vocab v1".
  void write(std::ostream& out) const;
  static Vocab read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

 private:
  Granularity granularity_ = Granularity::day;
  std::optional<std::int64_t> epoch_;
  bool frozen_ = false;
  std::vector<std::string> entities_;
  std::vector<std::string> relations_;
  std::unordered_map<std::string, EntityId> entity_ids_;
  std::unordered_map<std::string, RelationId> relation_ids_;
};

// Parses `subject<TAB>relation<TAB>object<TAB>timestamp`, interning names.
// The vocab must carry an epoch; times before it are a RangeError.
Quadruple parse_quadruple(std::string_view line, Vocab& vocab, Granularity g,
                          std::size_t line_number = 1);

// Appends (o, r^-1, s, t) for every (s, r, o, t). Input must hold base
// relations only and the vocab must be frozen.
std::vector<Quadruple> add_inverses(std::span<const Quadruple> facts, const Vocab& vocab);

// Removes exact duplicates, keeping first occurrences in order. Returns the
// number removed.
std::size_t deduplicate(std::vector<Quadruple>& facts);

void write_quadruples(std::ostream& out, std::span<const Quadruple> facts, const Vocab& vocab);

struct Dataset {
  Vocab vocab;
  std::vector<Quadruple> train;
  std::vector<Quadruple> valid;
  std::vector<Quadruple> test;
  std::size_t duplicates_dropped = 0;
};

struct DatasetPaths {
  std::filesystem::path train;
  std::filesystem::path valid;
  std::filesystem::path test;
};

// Loads all three files into one vocab. The epoch defaults to the earliest
// timestamp across the files. Valid/test may be empty paths.
Dataset load_dataset(const DatasetPaths& paths, Granularity g,
                     std::optional<std::int64_t> epoch = std::nullopt);
// Same, from in-memory TSV text (used by tests and the synthetic generator).
Dataset load_dataset_text(std::string_view train, std::string_view valid, std::string_view test,
                          Granularity g, std::optional<std::int64_t> epoch = std::nullopt);

struct Link {
  RelationId relation = 0;
  EntityId object = 0;
  TimeIndex time = 0;

  friend auto operator<=>(const Link&, const Link&) = default;
};

// Immutable time-sorted adjacency. Each entity's links are ordered by
// (time, relation, object) so time cuts are a binary search.
class TemporalGraph {
 public:
  TemporalGraph() = default;

  // Materializes inverses of the given base facts.
  static TemporalGraph build(std::span<const Quadruple> base_facts, const Vocab& vocab);
  // Stores the given directed facts as-is (no inverses added).
  static TemporalGraph from_directed(std::int32_t num_entities, std::span<const Quadruple> facts);

  // Links out of `entity`, restricted to time < time_bound when a bound is set.
  std::span<const Link> neighbors(EntityId entity,
                                  std::optional<TimeIndex> time_bound = std::nullopt) const;

  bool contains(const Quadruple& fact) const { return facts_.contains(fact); }

  std::int32_t num_entities() const noexcept { return num_entities_; }
  std::size_t num_facts() const noexcept { return links_.size(); }
  // Sorted by (time, subject, relation, object).
  std::vector<Quadruple> facts() const;

 private:
  std::int32_t num_entities_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<Link> links_;
  std::unordered_set<Quadruple, QuadrupleHash> facts_;
};

struct SplitSpec {
  std::vector<Quadruple> train;
  std::vector<Quadruple> valid;
  std::vector<Quadruple> test;
  // Partition of `train`: background facts and training queries.
  std::vector<Quadruple> facts;
  std::vector<Quadruple> queries;
};

struct TrainPartition {
  std::vector<Quadruple> facts;
  std::vector<Quadruple> queries;
};

// Seeded random partition: floor(n * fact_fraction) facts, the rest queries.
// A non-empty `query_relations` restricts the eligible queries: facts of other
// relations always go to the fact set and the fraction applies to the rest.
TrainPartition split_train(std::span<const Quadruple> train, double fact_fraction,
                           std::uint64_t seed,
                           std::span<const RelationId> query_relations = {});

// Throws RangeError unless max(train) < min(valid) <= max(valid) < min(test).
// Empty splits are skipped.
void check_chronological(std::span<const Quadruple> train, std::span<const Quadruple> valid,
                         std::span<const Quadruple> test);

SplitSpec make_split_spec(const Dataset& data, Regime regime, double fact_fraction,
                          std::uint64_t seed, std::span<const RelationId> query_relations = {});

// Sorts by (time, subject, relation, object).
void sort_chronologically(std::vector<Quadruple>& facts);

}  // namespace tpar
