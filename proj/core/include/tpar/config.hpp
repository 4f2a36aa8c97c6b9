#pragma once

// Flat `key = value` run configuration.
//
// Grammar: one setting per line; `#` starts a comment; blank lines are
// ignored; keys are the field names listed by config_keys(). A `preset` line
// is applied before every other line regardless of position. CLI overrides
// use the same keys and are applied last.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "tpar/store.hpp"
#include "tpar/train.hpp"

namespace tpar {

struct RunConfig {
  std::string preset;  // empty = built-in defaults
  DatasetPaths paths;
  Granularity granularity = Granularity::day;
  TrainConfig train;
  std::vector<std::string> query_relations;  // relation names, resolved against the vocab

  Regime regime() const noexcept { return train.regime; }
};

// Built-in defaults (ICEWS14 interpolation hyperparameters, workers = all
// hardware threads).
RunConfig default_config();
std::vector<std::string> preset_names();
// Throws ConfigError("preset") for unknown names.
RunConfig preset_config(std::string_view name);

std::vector<std::string> config_keys();
// Sets one field; throws ConfigError naming the key on bad keys or values.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

RunConfig parse_config(std::istream& in);
RunConfig parse_config_text(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

// Range checks for every field (delegates to TrainConfig::validate).
void validate(const RunConfig& config);

// Writes every field in parseable form.
void write_config(std::ostream& out, const RunConfig& config);

// TrainConfig with query relation names resolved; throws QueryError for
// names missing from the vocab.
TrainConfig resolve_train_config(const RunConfig& config, const Vocab& vocab);

}  // namespace tpar
