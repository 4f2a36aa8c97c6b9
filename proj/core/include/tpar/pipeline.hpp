#pragma once

// Interpolation -> extrapolation pipeline. A ratio of the training facts is
// kept; the rest become queries with one side masked. An interpolation model
// trained on the kept facts fills the masks (top-1), the completions are
// merged with the kept facts in time order, and an extrapolation model is
// trained on the merge. A control model trained on the kept facts alone is
// evaluated alongside.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tpar/evaluator.hpp"
#include "tpar/store.hpp"
#include "tpar/train.hpp"

namespace tpar {

struct MaskedQuery {
  Quadruple original;
  bool mask_subject = false;
};

struct MaskSplit {
  std::vector<Quadruple> sampled;
  std::vector<MaskedQuery> incomplete;
};

// floor(n * ratio) facts sampled without replacement (seeded); each remaining
// fact gets a uniformly chosen masked side. Both lists keep input order.
MaskSplit mask_split(std::span<const Quadruple> train, double ratio, std::uint64_t seed);

struct ProvenancedFact {
  Quadruple fact;
  bool predicted = false;  // true for completions
};

struct Completion {
  ProvenancedFact fact;
  double score = 0.0;
  bool matches_original = false;
};

// Fills every masked query with its top-1 entity (lowest id on ties).
// Completions scoring below `threshold` are dropped when one is given.
std::vector<Completion> complete(const ModelParams& model, const TemporalGraph& sampled_graph,
                                 std::span<const MaskedQuery> incomplete, const Vocab& vocab,
                                 const FrontierOptions& frontier, int workers = 1,
                                 std::optional<double> threshold = std::nullopt);

// Sampled facts plus completions, sorted by (time, subject, relation, object);
// duplicates keep the observed copy.
std::vector<ProvenancedFact> merge_chronologically(std::span<const Quadruple> sampled,
                                                   std::span<const Completion> completions);

struct PipelineConfig {
  std::vector<double> ratios{0.6, 0.7, 0.8};
  std::uint64_t seed = 0;
  TrainConfig interpolation;
  TrainConfig extrapolation;
  std::optional<double> score_threshold;

  void validate() const;
};

struct PipelineRow {
  double ratio = 0.0;
  bool interpolation = false;  // false = control (kept facts only)
  Metrics metrics;
  std::size_t train_facts = 0;
  std::size_t completed = 0;
  double completion_accuracy = 0.0;
};

struct PipelineReport {
  std::vector<PipelineRow> rows;
  // Per ratio, the merged extrapolation training facts with provenance.
  std::vector<std::vector<ProvenancedFact>> merged;
  // Test-split reads observed before the first extrapolation evaluation.
  std::size_t early_test_reads = 0;
};

// The dataset's test split is only opened after both Step-2 models exist.
// Writes one JSON line per stage to `log` if given.
PipelineReport run_pipeline(const Dataset& data, const PipelineConfig& config, std::ostream* log = nullptr);

void write_pipeline_tsv(std::ostream& out, const PipelineReport& report);
void write_pipeline_table(std::ostream& out, const PipelineReport& report);
// TSV of merged facts: subject relation object time provenance.
void write_merged_facts(std::ostream& out, std::span<const ProvenancedFact> facts, const Vocab& vocab);

}  // namespace tpar
