#pragma once

// Synthetic TKG with a planted multi-hop rule:
//   body_1(x0, x1, t) & ... & body_k(x_{k-1}, x_k, t)  =>  head(x0, x_k, t + delay)
// Each of `chains` rule chains fires at times t = phase (mod period). In
// random mode the chain's entities are redrawn at every firing; in periodic
// mode they are fixed, so every fact also recurs one period earlier.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tpar/store.hpp"
#include "tpar/types.hpp"

namespace tpar {

enum class BodyMode { random, periodic };

const char* to_string(BodyMode m) noexcept;
BodyMode parse_body_mode(std::string_view text);

struct SynthSpec {
  int entities = 30;
  int rule_length = 2;  // k body hops
  int period = 6;
  int chains = 6;
  int span = 120;  // times [0, span)
  int delay = 1;
  int noise_facts = 0;
  BodyMode mode = BodyMode::random;
  Regime regime = Regime::extrapolation;
  double valid_fraction = 0.15;
  double test_fraction = 0.15;
  std::uint64_t seed = 0;

  // Throws ConfigError for infeasible specs.
  void validate() const;
};

struct NamedFact {
  std::string subject;
  std::string relation;
  std::string object;
  std::int64_t time = 0;

  friend bool operator==(const NamedFact&, const NamedFact&) = default;
};

struct RuleInstance {
  NamedFact head;
  std::vector<NamedFact> body;  // x0 -> x1 -> ... -> xk, all at the firing time
};

struct SynthData {
  std::vector<NamedFact> train;
  std::vector<NamedFact> valid;
  std::vector<NamedFact> test;
  std::vector<RuleInstance> instances;  // only those whose head was emitted

  std::string train_tsv() const;
  std::string valid_tsv() const;
  std::string test_tsv() const;
  // One line per link: instance, hop (0 = head), subject, relation, object, time.
  std::string instances_tsv() const;

  // Parses the three splits with index granularity and epoch 0.
  Dataset load() const;
  void write(const std::filesystem::path& dir) const;
};

inline std::string body_relation_name(int hop) { return "body" + std::to_string(hop); }
inline constexpr const char* kHeadRelation = "head";
inline constexpr const char* kNoiseRelation = "noise";

SynthData generate_synthetic(const SynthSpec& spec);

// Reads an instances TSV written by SynthData::write.
std::vector<RuleInstance> read_instances(const std::filesystem::path& path);

}  // namespace tpar
