#include "tpar/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "tpar/errors.hpp"
#include "tpar/parallel.hpp"
#include "tpar/rng.hpp"

namespace tpar {

MaskSplit mask_split(std::span<const Quadruple> train, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("ratio", "must lie in (0, 1)");
  const auto n = train.size();
  const auto keep = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratio + 1e-9));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(mix_seeds(seed, 0x3a5c));
  rng.shuffle(order);
  std::vector<char> sampled(n, 0);
  for (std::size_t i = 0; i < keep; ++i) sampled[order[i]] = 1;
  MaskSplit out;
  for (std::size_t i = 0; i < n; ++i) {
    if (sampled[i]) out.sampled.push_back(train[i]);
    else out.incomplete.push_back({train[i], false});
  }
  for (auto& q : out.incomplete) q.mask_subject = rng.bernoulli(0.5);
  return out;
}

std::vector<Completion> complete(const ModelParams& model, const TemporalGraph& sampled_graph,
                                 std::span<const MaskedQuery> incomplete, const Vocab& vocab,
                                 const FrontierOptions& frontier, int workers, std::optional<double> threshold) {
  auto fopts = frontier;
  fopts.max_length = model.dims.max_length;
  fopts.identity_relation = vocab.identity_relation();
  std::vector<Completion> all(incomplete.size());
  parallel_for(incomplete.size(), workers, [&](std::size_t i) {
    const auto& m = incomplete[i];
    const auto task = candidates(m.original, vocab, Regime::interpolation)[m.mask_subject ? 1 : 0];
    const auto scores = model_scores(model, sampled_graph, task.query, fopts);
    const auto best = static_cast<EntityId>(std::max_element(scores.begin(), scores.end()) - scores.begin());
    Quadruple fact = m.original;
    if (m.mask_subject) fact.subject = best;
    else fact.object = best;
    all[i].fact = {fact, true};
    all[i].score = scores[static_cast<std::size_t>(best)];
    all[i].matches_original = fact == m.original;
  });
  if (!threshold) return all;
  std::vector<Completion> kept;
  for (auto& c : all) {
    if (c.score >= *threshold) kept.push_back(std::move(c));
  }
  return kept;
}

std::vector<ProvenancedFact> merge_chronologically(std::span<const Quadruple> sampled,
                                                   std::span<const Completion> completions) {
  std::vector<ProvenancedFact> merged;
  std::unordered_set<Quadruple, QuadrupleHash> seen;
  for (const auto& q : sampled) {
    if (seen.insert(q).second) merged.push_back({q, false});
  }
  for (const auto& c : completions) {
    if (seen.insert(c.fact.fact).second) merged.push_back(c.fact);
  }
  std::stable_sort(merged.begin(), merged.end(), [](const ProvenancedFact& a, const ProvenancedFact& b) {
    return std::tie(a.fact.time, a.fact.subject, a.fact.relation, a.fact.object) <
           std::tie(b.fact.time, b.fact.subject, b.fact.relation, b.fact.object);
  });
  return merged;
}

void PipelineConfig::validate() const {
  if (ratios.empty()) throw ConfigError("ratios", "need at least one ratio");
  for (double r : ratios) {
    if (!(r > 0.0 && r < 1.0)) throw ConfigError("ratios", "every ratio must lie in (0, 1)");
  }
  interpolation.validate();
  extrapolation.validate();
  if (interpolation.regime != Regime::interpolation) throw ConfigError("interpolation.regime", "must be interpolation");
  if (extrapolation.regime != Regime::extrapolation) throw ConfigError("extrapolation.regime", "must be extrapolation");
}

namespace {

// Holds the test split and refuses reads until opened.
class TestSplitGuard {
 public:
  explicit TestSplitGuard(std::span<const Quadruple> test) : test_(test) {}

  void open() { open_ = true; }

  std::span<const Quadruple> read() {
    if (!open_) {
      ++early_reads_;
      throw std::logic_error("pipeline: test split read before the extrapolation stage");
    }
    return test_;
  }

  std::size_t early_reads() const { return early_reads_; }

 private:
  std::span<const Quadruple> test_;
  bool open_ = false;
  std::size_t early_reads_ = 0;
};

void log_line(std::ostream* log, const nlohmann::ordered_json& j) {
  if (log) *log << j.dump() << '\n';
}

}  // namespace

PipelineReport run_pipeline(const Dataset& data, const PipelineConfig& config, std::ostream* log) {
  config.validate();
  if (data.train.empty()) throw InputError("pipeline: empty training split");
  if (data.test.empty()) throw InputError("pipeline: empty test split");
  check_chronological(data.train, data.valid, data.test);

  TestSplitGuard guard(data.test);
  // Working copy without the test split for every training stage.
  Dataset staged;
  staged.vocab = data.vocab;
  staged.valid = data.valid;

  PipelineReport report;
  struct Pending {
    double ratio;
    bool interpolation;
    ModelParams params;
    std::vector<Quadruple> train;
    std::size_t completed;
    double accuracy;
  };
  std::vector<Pending> pending;

  for (std::size_t ri = 0; ri < config.ratios.size(); ++ri) {
    const double ratio = config.ratios[ri];
    const auto seed = mix_seeds(config.seed, ri);
    const auto split = mask_split(data.train, ratio, seed);

    // Step 1: interpolation on the kept facts, no validation.
    Dataset interp = staged;
    interp.train = split.sampled;
    interp.valid.clear();
    auto icfg = config.interpolation;
    icfg.eval_every = 0;
    const auto interp_model = train(interp, icfg).params;
    const auto sampled_graph = TemporalGraph::build(split.sampled, data.vocab);
    const auto completions = complete(interp_model, sampled_graph, split.incomplete, data.vocab,
                                      icfg.frontier(data.vocab), icfg.workers, config.score_threshold);
    std::size_t correct = 0;
    for (const auto& c : completions) correct += c.matches_original;
    const double accuracy = completions.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(completions.size());
    auto merged = merge_chronologically(split.sampled, completions);
    std::size_t predicted = 0;
    for (const auto& f : merged) predicted += f.predicted;
    log_line(log, {{"stage", "interpolation"}, {"ratio", ratio}, {"sampled", split.sampled.size()},
                   {"masked", split.incomplete.size()}, {"merged", merged.size()}, {"predicted", predicted},
                   {"completion_accuracy", accuracy}});

    // Step 2: extrapolation from scratch on the merge, and the control.
    std::vector<Quadruple> merged_facts;
    merged_facts.reserve(merged.size());
    for (const auto& f : merged) merged_facts.push_back(f.fact);
    for (const bool with_interp : {true, false}) {
      Dataset extra = staged;
      extra.train = with_interp ? merged_facts : split.sampled;
      sort_chronologically(extra.train);
      auto model = train(extra, config.extrapolation).params;
      log_line(log, {{"stage", "extrapolation"}, {"ratio", ratio}, {"interpolation", with_interp},
                     {"train_facts", extra.train.size()}});
      pending.push_back({ratio, with_interp, std::move(model), std::move(extra.train), with_interp ? predicted : 0,
                         with_interp ? accuracy : 0.0});
    }
    report.merged.push_back(std::move(merged));
  }

  report.early_test_reads = guard.early_reads();
  guard.open();
  const auto test = guard.read();
  EvalOptions opts;
  opts.regime = Regime::extrapolation;
  opts.frontier = config.extrapolation.frontier(data.vocab);
  opts.workers = config.extrapolation.workers;
  opts.query_relations = config.extrapolation.query_relations;
  const auto filter = FilterIndex::build(
      std::vector<std::span<const Quadruple>>{data.train, data.valid, test}, data.vocab);
  for (auto& p : pending) {
    std::vector<Quadruple> background = p.train;
    background.insert(background.end(), data.valid.begin(), data.valid.end());
    background.insert(background.end(), test.begin(), test.end());
    const auto graph = TemporalGraph::build(background, data.vocab);
    PipelineRow row;
    row.ratio = p.ratio;
    row.interpolation = p.interpolation;
    row.metrics = evaluate(p.params, graph, test, filter, data.vocab, opts).metrics;
    row.train_facts = p.train.size();
    row.completed = p.completed;
    row.completion_accuracy = p.accuracy;
    log_line(log, {{"stage", "test"}, {"ratio", row.ratio}, {"interpolation", row.interpolation},
                   {"mrr", row.metrics.mrr}, {"hits1", row.metrics.hits1}, {"hits3", row.metrics.hits3},
                   {"hits10", row.metrics.hits10}});
    report.rows.push_back(row);
  }
  return report;
}

void write_pipeline_tsv(std::ostream& out, const PipelineReport& report) {
  out << "ratio\tinterpolation\tmrr\thits1\thits3\thits10\ttrain_facts\tcompleted\tcompletion_accuracy\n";
  for (const auto& r : report.rows) {
    out << r.ratio << '\t' << (r.interpolation ? "yes" : "no") << '\t' << r.metrics.mrr << '\t' << r.metrics.hits1
        << '\t' << r.metrics.hits3 << '\t' << r.metrics.hits10 << '\t' << r.train_facts << '\t' << r.completed << '\t'
        << r.completion_accuracy << '\n';
  }
}

void write_pipeline_table(std::ostream& out, const PipelineReport& report) {
  const auto flags = out.flags();
  out << "setting  ratio  interp    MRR  Hits@1  Hits@3  Hits@10\n";
  for (const auto& r : report.rows) {
    const int pct = static_cast<int>(std::lround(r.ratio * 100));
    const char setting = pct <= 60 ? 'A' : pct <= 70 ? 'B' : pct <= 80 ? 'C' : '-';
    out << "   " << setting << "     " << std::setw(3) << pct << "%  " << (r.interpolation ? "  yes " : "  no  ")
        << std::fixed << std::setprecision(4) << ' ' << r.metrics.mrr << "  " << r.metrics.hits1 << "  "
        << r.metrics.hits3 << "  " << r.metrics.hits10 << '\n';
  }
  out.flags(flags);
}

void write_merged_facts(std::ostream& out, std::span<const ProvenancedFact> facts, const Vocab& vocab) {
  for (const auto& f : facts) {
    out << vocab.entity_name(f.fact.subject) << '\t' << vocab.relation_name(f.fact.relation) << '\t'
        << vocab.entity_name(f.fact.object) << '\t' << vocab.format_time(f.fact.time) << '\t'
        << (f.predicted ? "predicted" : "observed") << '\n';
  }
}

}  // namespace tpar
