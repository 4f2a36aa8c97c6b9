// tpar: dataset prep, synthetic data, training, evaluation, interpretation
// and the interpolation -> extrapolation pipeline.
//
// Exit codes: 0 ok, 1 internal error, 2 bad input/config, 3 checkpoint,
// 4 query resolution.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tpar/config.hpp"
#include "tpar/errors.hpp"
#include "tpar/evaluator.hpp"
#include "tpar/interpreter.hpp"
#include "tpar/pipeline.hpp"
#include "tpar/synth.hpp"
#include "tpar/train.hpp"

#ifndef TPAR_VERSION
#define TPAR_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace tpar;

namespace {

enum Exit { kOk = 0, kInternal = 1, kInput = 2, kCheckpoint = 3, kQuery = 4 };

constexpr const char* kCheckpointFile = "model.ckpt";
constexpr const char* kSnapshotFile = "config.snapshot";
constexpr const char* kVocabFile = "vocab.txt";
constexpr const char* kLogFile = "train.log";

// Config file (optional), then --set key=value overrides in order.
struct ConfigFlags {
  std::string path;
  std::string preset;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;

  void add(CLI::App* cmd) {
    cmd->add_option("-c,--config", path, "key = value config file");
    std::string names;
    for (const auto& n : preset_names()) names += (names.empty() ? "" : ", ") + n;
    cmd->add_option("--preset", preset, "start from a named preset: " + names);
    cmd->add_option("--set", sets, "override one setting, key=value (repeatable)");
    cmd->add_option("--seed", seed, "parameter/shuffle/dropout seed");
    cmd->add_option("--workers", workers, "worker threads (0 = all hardware threads)");
  }

  RunConfig resolve() const {
    RunConfig c = path.empty() ? default_config() : load_config(path);
    // Dataset paths in a config file are relative to that file.
    const fs::path base = path.empty() ? fs::current_path() : fs::absolute(path).parent_path();
    for (auto* p : {&c.paths.train, &c.paths.valid, &c.paths.test}) {
      if (!p->empty() && p->is_relative()) *p = base / *p;
    }
    if (!preset.empty()) apply_setting(c, "preset", preset);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError(s, "override must be key=value");
      apply_setting(c, s.substr(0, eq), s.substr(eq + 1));
    }
    for (auto* p : {&c.paths.train, &c.paths.valid, &c.paths.test}) {
      if (!p->empty()) *p = fs::absolute(*p);
    }
    if (seed) c.train.seed = *seed;
    if (workers) c.train.workers = *workers;
    validate(c);
    return c;
  }
};

Dataset load_for(const RunConfig& c) {
  if (c.paths.train.empty()) throw ConfigError("train", "no training file given");
  return load_dataset(c.paths, c.granularity);
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw InputError("cannot write " + p.string());
  out << text;
}

// A trained run directory: snapshot, checkpoint and the dataset it names.
struct Run {
  RunConfig config;
  Dataset data;
  ModelParams params;
  TrainConfig train;
};

Run open_run(const fs::path& dir, const std::string& checkpoint) {
  Run r;
  const auto snap = dir / kSnapshotFile;
  if (!fs::exists(snap)) throw InputError("run directory has no " + std::string(kSnapshotFile) + ": " + dir.string());
  r.config = load_config(snap);
  r.data = load_for(r.config);
  r.params = load_checkpoint(checkpoint.empty() ? dir / kCheckpointFile : fs::path(checkpoint));
  const auto& d = r.params.dims;
  if (d.num_entities != r.data.vocab.num_entities() || d.num_base_relations != r.data.vocab.num_base_relations()) {
    throw CheckpointError("checkpoint dims (" + std::to_string(d.num_entities) + " entities, " +
                          std::to_string(d.num_base_relations) + " relations) do not match the dataset (" +
                          std::to_string(r.data.vocab.num_entities()) + ", " +
                          std::to_string(r.data.vocab.num_base_relations()) + ")");
  }
  r.train = resolve_train_config(r.config, r.data.vocab);
  return r;
}

int cmd_prep(const std::string& train, const std::string& valid, const std::string& test,
             const std::string& granularity, const std::string& out) {
  const auto g = parse_granularity(granularity);
  const auto data = load_dataset({train, valid, test}, g);
  std::cout << "entities   " << data.vocab.num_entities() << '\n'
            << "relations  " << data.vocab.num_base_relations() << '\n'
            << "train      " << data.train.size() << '\n'
            << "valid      " << data.valid.size() << '\n'
            << "test       " << data.test.size() << '\n'
            << "duplicates " << data.duplicates_dropped << '\n';
  try {
    check_chronological(data.train, data.valid, data.test);
    std::cout << "splits are chronological\n";
  } catch (const RangeError&) {
    std::cout << "splits overlap in time (interpolation only)\n";
  }
  if (!out.empty()) {
    fs::create_directories(out);
    data.vocab.save(fs::path(out) / kVocabFile);
    const std::pair<const char*, const std::vector<Quadruple>*> parts[] = {
        {"train.txt", &data.train}, {"valid.txt", &data.valid}, {"test.txt", &data.test}};
    for (const auto& [name, facts] : parts) {
      std::ofstream f(fs::path(out) / name);
      if (!f) throw InputError("cannot write " + (fs::path(out) / name).string());
      write_quadruples(f, *facts, data.vocab);
    }
  }
  return kOk;
}

int cmd_synth(const SynthSpec& spec, const std::string& out) {
  const auto data = generate_synthetic(spec);
  data.write(out);
  std::cout << "wrote " << data.train.size() << " train, " << data.valid.size() << " valid, " << data.test.size()
            << " test facts and " << data.instances.size() << " rule instances to " << out << '\n';
  return kOk;
}

int cmd_train(const ConfigFlags& flags, const std::string& run_dir) {
  const auto config = flags.resolve();
  const auto data = load_for(config);
  const auto tc = resolve_train_config(config, data.vocab);
  fs::create_directories(run_dir);
  const fs::path dir(run_dir);
  {
    std::ostringstream snap;
    snap << "# tpar " << TPAR_VERSION << '\n';
    write_config(snap, config);
    write_file(dir / kSnapshotFile, snap.str());
  }
  data.vocab.save(dir / kVocabFile);
  std::ofstream log(dir / kLogFile);
  if (!log) throw InputError("cannot write " + (dir / kLogFile).string());
  const auto result = train(data, tc, &log);

  nlohmann::ordered_json meta;
  meta["version"] = TPAR_VERSION;
  meta["seed"] = tc.seed;
  meta["split_seed"] = tc.split_seed;
  meta["regime"] = to_string(tc.regime);
  meta["best_epoch"] = result.best_epoch;
  if (result.best_valid_mrr) meta["best_valid_mrr"] = *result.best_valid_mrr;
  meta["stopped_early"] = result.stopped_early;
  save_checkpoint(dir / kCheckpointFile, result.params, meta.dump());

  std::cout << "trained " << result.log.size() << " epochs, best epoch " << result.best_epoch;
  if (result.best_valid_mrr) std::cout << ", valid MRR " << *result.best_valid_mrr;
  std::cout << "\ncheckpoint " << (dir / kCheckpointFile).string() << '\n';
  return kOk;
}

int cmd_eval(const std::string& run_dir, const std::string& checkpoint, const std::string& split_name,
             bool time_unwise, bool unsafe_raw_filter, const std::string& dump_ranks, bool json,
             std::optional<int> workers, std::size_t limit) {
  if (time_unwise && !unsafe_raw_filter) {
    throw ConfigError("time-unwise", "the raw (time-unwise) filter is a debug mode; pass --unsafe-raw-filter as well");
  }
  if (split_name != "valid" && split_name != "test") throw ConfigError("split", "expected valid or test");
  const auto run = open_run(run_dir, checkpoint);
  const bool on_test = split_name == "test";
  const auto& split = on_test ? run.data.test : run.data.valid;
  EvalOptions opts;
  opts.regime = run.train.regime;
  opts.frontier = run.train.frontier(run.data.vocab);
  opts.time_unwise_filter = time_unwise;
  opts.workers = workers ? *workers : run.train.workers;
  opts.query_relations = run.train.query_relations;
  opts.limit = limit;
  const auto graph = evaluation_background(run.data, run.train.regime, on_test);
  const auto filter = evaluation_filter(run.data, on_test);
  const auto result = evaluate(run.params, graph, split, filter, run.data.vocab, opts);
  if (json) write_metrics_record(std::cout, result.metrics, split_name);
  else write_metrics_table(std::cout, result.metrics, split_name);
  if (!dump_ranks.empty()) {
    std::ofstream out(dump_ranks);
    if (!out) throw InputError("cannot write " + dump_ranks);
    write_rank_dump(out, result.ranks, run.data.vocab);
  }
  return kOk;
}

EntityId entity_or_throw(const Vocab& v, const std::string& name) {
  const auto id = v.find_entity(name);
  if (!id) throw QueryError("unknown entity: " + name);
  return *id;
}

int cmd_interpret(const std::string& run_dir, const std::string& checkpoint, const std::string& subject,
                  const std::string& relation, const std::string& time, const std::string& target, std::size_t k,
                  const std::string& mode, const std::string& tsv) {
  const auto run = open_run(run_dir, checkpoint);
  const auto& v = run.data.vocab;
  Query q;
  q.entity = entity_or_throw(v, subject);
  const auto rel = v.find_relation(relation);
  if (!rel || *rel == v.identity_relation()) throw QueryError("unknown relation: " + relation);
  q.relation = *rel;
  q.regime = run.train.regime;
  try {
    q.time = parse_timestamp(time, v.granularity()) - v.epoch().value_or(0);
  } catch (const Error& e) {
    throw QueryError("bad query time '" + time + "': " + e.what());
  }
  std::optional<EntityId> tgt;
  if (!target.empty()) tgt = entity_or_throw(v, target);
  Attribution attribution = Attribution::logit;
  if (mode == "alpha") attribution = Attribution::alpha;
  else if (mode != "logit") throw ConfigError("mode", "expected logit or alpha");
  const auto graph = evaluation_background(run.data, run.train.regime, true);
  const auto interp = interpret(run.params, graph, q, run.train.frontier(v), k, tgt, attribution);
  render_interpretation(std::cout, interp, v);
  if (!tsv.empty()) {
    std::ofstream out(tsv);
    if (!out) throw InputError("cannot write " + tsv);
    write_interpretation_tsv(out, interp, v);
  }
  return kOk;
}

std::vector<double> parse_ratios(const std::string& text) {
  std::vector<double> out;
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("ratios", "expected comma-separated numbers, got '" + text + "'");
    }
  }
  return out;
}

int cmd_pipeline(const ConfigFlags& flags, const std::string& ratios, const std::string& out_dir,
                 std::optional<double> threshold) {
  const auto config = flags.resolve();
  const auto data = load_for(config);
  const auto base = resolve_train_config(config, data.vocab);
  PipelineConfig pc;
  pc.ratios = parse_ratios(ratios);
  pc.seed = base.seed;
  pc.interpolation = base;
  pc.interpolation.regime = Regime::interpolation;
  pc.extrapolation = base;
  pc.extrapolation.regime = Regime::extrapolation;
  pc.score_threshold = threshold;
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  {
    std::ostringstream snap;
    snap << "# tpar " << TPAR_VERSION << "\n# ratios = " << ratios << '\n';
    write_config(snap, config);
    write_file(dir / kSnapshotFile, snap.str());
  }
  std::ofstream log(dir / "pipeline.log");
  const auto report = run_pipeline(data, pc, &log);
  std::ofstream tsv(dir / "pipeline.tsv");
  write_pipeline_tsv(tsv, report);
  for (std::size_t i = 0; i < report.merged.size(); ++i) {
    std::ofstream m(dir / ("merged_" + std::to_string(i) + ".tsv"));
    write_merged_facts(m, report.merged[i], data.vocab);
  }
  write_pipeline_table(std::cout, report);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal path reasoning over temporal knowledge graphs"};
  app.set_version_flag("--version", TPAR_VERSION);
  app.require_subcommand(1);

  auto* prep = app.add_subcommand("prep", "load a TSV dataset, report statistics, optionally normalize it");
  std::string p_train, p_valid, p_test, p_gran = "day", p_out;
  prep->add_option("--train", p_train, "training TSV")->required();
  prep->add_option("--valid", p_valid, "validation TSV");
  prep->add_option("--test", p_test, "test TSV");
  prep->add_option("--granularity", p_gran, "day, year or index");
  prep->add_option("--out", p_out, "write vocab.txt and deduplicated splits here");

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset with a planted multi-hop rule");
  SynthSpec spec;
  std::string s_out, s_mode = "random", s_regime = "extrapolation";
  synth->add_option("--out", s_out, "output directory")->required();
  synth->add_option("--entities", spec.entities, "number of entities");
  synth->add_option("--rule-length", spec.rule_length, "body hops of the planted rule");
  synth->add_option("--period", spec.period, "firing period");
  synth->add_option("--chains", spec.chains, "rule chains");
  synth->add_option("--span", spec.span, "number of timestamps");
  synth->add_option("--delay", spec.delay, "head delay after the body");
  synth->add_option("--noise", spec.noise_facts, "random noise facts");
  synth->add_option("--mode", s_mode, "random or periodic body entities");
  synth->add_option("--regime", s_regime, "interpolation or extrapolation split");
  synth->add_option("--valid-fraction", spec.valid_fraction, "validation fraction");
  synth->add_option("--test-fraction", spec.test_fraction, "test fraction");
  synth->add_option("--seed", spec.seed, "generator seed");

  auto* train_cmd = app.add_subcommand("train", "train a model into a run directory");
  ConfigFlags t_flags;
  t_flags.add(train_cmd);
  std::string t_run;
  train_cmd->add_option("--run-dir", t_run, "output run directory")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a trained run");
  std::string e_run, e_ckpt, e_split = "test", e_dump;
  bool e_unwise = false, e_unsafe = false, e_json = false;
  std::optional<int> e_workers;
  std::size_t e_limit = 0;
  eval->add_option("--run-dir", e_run, "run directory")->required();
  eval->add_option("--checkpoint", e_ckpt, "checkpoint (default: run-dir/model.ckpt)");
  eval->add_option("--split", e_split, "valid or test");
  eval->add_option("--dump-ranks", e_dump, "write per-query ranks as TSV");
  eval->add_flag("--time-unwise", e_unwise, "filter answers at any time (debug)");
  eval->add_flag("--unsafe-raw-filter", e_unsafe, "acknowledge the time-unwise filter");
  eval->add_flag("--json", e_json, "print a JSON metrics record");
  eval->add_option("--workers", e_workers, "worker threads");
  eval->add_option("--limit", e_limit, "rank at most this many facts");

  auto* interp = app.add_subcommand("interpret", "explain one prediction with its top temporal paths");
  std::string i_run, i_ckpt, i_subject, i_relation, i_time, i_target, i_mode = "logit", i_tsv;
  std::size_t i_k = 3;
  interp->add_option("--run-dir", i_run, "run directory")->required();
  interp->add_option("--checkpoint", i_ckpt, "checkpoint (default: run-dir/model.ckpt)");
  interp->add_option("--subject", i_subject, "query entity name")->required();
  interp->add_option("--relation", i_relation, "query relation (name or name^-1)")->required();
  interp->add_option("--time", i_time, "query timestamp")->required();
  interp->add_option("--target", i_target, "explain this answer instead of the top one");
  interp->add_option("-k", i_k, "paths to show");
  interp->add_option("--mode", i_mode, "importance: logit or alpha");
  interp->add_option("--tsv", i_tsv, "also write the paths as TSV");

  auto* pipe = app.add_subcommand("pipeline", "interpolation-completed extrapolation versus the control");
  ConfigFlags pl_flags;
  pl_flags.add(pipe);
  std::string pl_ratios = "0.6,0.7,0.8", pl_out;
  std::optional<double> pl_threshold;
  pipe->add_option("--ratios", pl_ratios, "comma-separated kept-fact ratios");
  pipe->add_option("--out", pl_out, "output directory")->required();
  pipe->add_option("--threshold", pl_threshold, "drop completions scoring below this");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }

  try {
    if (*prep) return cmd_prep(p_train, p_valid, p_test, p_gran, p_out);
    if (*synth) {
      spec.mode = parse_body_mode(s_mode);
      if (s_regime == "interpolation") spec.regime = Regime::interpolation;
      else if (s_regime == "extrapolation") spec.regime = Regime::extrapolation;
      else throw ConfigError("regime", "expected interpolation or extrapolation");
      return cmd_synth(spec, s_out);
    }
    if (*train_cmd) return cmd_train(t_flags, t_run);
    if (*eval) return cmd_eval(e_run, e_ckpt, e_split, e_unwise, e_unsafe, e_dump, e_json, e_workers, e_limit);
    if (*interp) return cmd_interpret(i_run, i_ckpt, i_subject, i_relation, i_time, i_target, i_k, i_mode, i_tsv);
    if (*pipe) return cmd_pipeline(pl_flags, pl_ratios, pl_out, pl_threshold);
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kCheckpoint;
  } catch (const QueryError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kQuery;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  } catch (const RangeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  } catch (const VocabError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}
