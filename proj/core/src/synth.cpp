#include "tpar/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "tpar/errors.hpp"
#include "tpar/rng.hpp"

namespace tpar {

const char* to_string(BodyMode m) noexcept { return m == BodyMode::random ? "random" : "periodic"; }

BodyMode parse_body_mode(std::string_view text) {
  if (text == "random") return BodyMode::random;
  if (text == "periodic") return BodyMode::periodic;
  throw ConfigError("mode", "expected random or periodic, got '" + std::string(text) + "'");
}

void SynthSpec::validate() const {
  if (rule_length < 1) throw ConfigError("rule_length", "must be at least 1");
  if (entities < rule_length + 1) throw ConfigError("entities", "need at least rule_length + 1 entities");
  if (period < 1) throw ConfigError("period", "must be at least 1");
  if (span < 1) throw ConfigError("span", "must be at least 1");
  if (period > span) throw ConfigError("period", "period exceeds the time span");
  if (delay < 1 || delay >= span) throw ConfigError("delay", "must lie in [1, span)");
  if (chains < 1) throw ConfigError("chains", "must be at least 1");
  if (noise_facts < 0) throw ConfigError("noise", "must be non-negative");
  if (!(valid_fraction >= 0 && test_fraction > 0 && valid_fraction + test_fraction < 1)) {
    throw ConfigError("valid_fraction", "valid and test fractions must be non-negative, test positive, sum below 1");
  }
}

namespace {

std::string entity(int i) { return "e" + std::to_string(i); }

// Draws entities in runs of distinct ids; reshuffles once exhausted.
class EntityPool {
 public:
  EntityPool(int n, Rng& rng) : rng_(rng), perm_(static_cast<std::size_t>(n)) {
    std::iota(perm_.begin(), perm_.end(), 0);
    rng_.shuffle(perm_);
  }

  std::vector<int> draw(int count) {
    std::vector<int> out;
    while (static_cast<int>(out.size()) < count) {
      if (next_ == perm_.size()) {
        rng_.shuffle(perm_);
        next_ = 0;
      }
      const int e = perm_[next_++];
      if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(e);
    }
    return out;
  }

 private:
  Rng& rng_;
  std::vector<int> perm_;
  std::size_t next_ = 0;
};

std::string to_tsv(const std::vector<NamedFact>& facts) {
  std::ostringstream out;
  for (const auto& f : facts) out << f.subject << '\t' << f.relation << '\t' << f.object << '\t' << f.time << '\n';
  return out.str();
}

}  // namespace

SynthData generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  Rng rng(mix_seeds(spec.seed, 0x5417));
  EntityPool pool(spec.entities, rng);

  std::vector<std::vector<int>> fixed;
  if (spec.mode == BodyMode::periodic) {
    for (int c = 0; c < spec.chains; ++c) fixed.push_back(pool.draw(spec.rule_length + 1));
  }

  std::vector<NamedFact> body_facts;
  std::vector<NamedFact> head_facts;
  SynthData data;
  for (int t = 0; t < spec.span; ++t) {
    for (int c = 0; c < spec.chains; ++c) {
      if (t % spec.period != c % spec.period) continue;
      const auto xs = spec.mode == BodyMode::periodic ? fixed[static_cast<std::size_t>(c)] : pool.draw(spec.rule_length + 1);
      RuleInstance inst;
      for (int h = 0; h < spec.rule_length; ++h) {
        inst.body.push_back({entity(xs[static_cast<std::size_t>(h)]), body_relation_name(h + 1),
                             entity(xs[static_cast<std::size_t>(h + 1)]), t});
      }
      body_facts.insert(body_facts.end(), inst.body.begin(), inst.body.end());
      if (t + spec.delay < spec.span) {
        inst.head = {entity(xs.front()), kHeadRelation, entity(xs.back()), t + spec.delay};
        head_facts.push_back(inst.head);
        data.instances.push_back(std::move(inst));
      }
    }
  }
  std::vector<NamedFact> noise;
  for (int i = 0; i < spec.noise_facts; ++i) {
    const auto pair = pool.draw(2);
    noise.push_back({entity(pair[0]), kNoiseRelation, entity(pair[1]),
                     static_cast<std::int64_t>(rng.bounded(static_cast<std::uint64_t>(spec.span)))});
  }

  if (spec.regime == Regime::extrapolation) {
    std::vector<NamedFact> all = body_facts;
    all.insert(all.end(), head_facts.begin(), head_facts.end());
    all.insert(all.end(), noise.begin(), noise.end());
    std::stable_sort(all.begin(), all.end(), [](const NamedFact& a, const NamedFact& b) { return a.time < b.time; });
    const auto train_end = static_cast<std::int64_t>(
        std::floor(spec.span * (1.0 - spec.valid_fraction - spec.test_fraction)));
    const auto valid_end = static_cast<std::int64_t>(std::floor(spec.span * (1.0 - spec.test_fraction)));
    for (auto& f : all) {
      if (f.time < train_end) data.train.push_back(f);
      else if (f.time < valid_end) data.valid.push_back(f);
      else data.test.push_back(f);
    }
  } else {
    data.train = body_facts;
    data.train.insert(data.train.end(), noise.begin(), noise.end());
    std::vector<std::size_t> order(head_facts.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    const auto n = head_facts.size();
    const auto n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(n * spec.test_fraction)));
    const auto n_valid = static_cast<std::size_t>(std::floor(n * spec.valid_fraction));
    for (std::size_t i = 0; i < n; ++i) {
      const auto& f = head_facts[order[i]];
      if (i < n_test) data.test.push_back(f);
      else if (i < n_test + n_valid) data.valid.push_back(f);
      else data.train.push_back(f);
    }
    for (auto* part : {&data.train, &data.valid, &data.test}) {
      std::stable_sort(part->begin(), part->end(), [](const NamedFact& a, const NamedFact& b) { return a.time < b.time; });
    }
  }
  return data;
}

std::string SynthData::train_tsv() const { return to_tsv(train); }
std::string SynthData::valid_tsv() const { return to_tsv(valid); }
std::string SynthData::test_tsv() const { return to_tsv(test); }

std::string SynthData::instances_tsv() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    auto line = [&](int hop, const NamedFact& f) {
      out << i << '\t' << hop << '\t' << f.subject << '\t' << f.relation << '\t' << f.object << '\t' << f.time << '\n';
    };
    line(0, inst.head);
    for (std::size_t h = 0; h < inst.body.size(); ++h) line(static_cast<int>(h + 1), inst.body[h]);
  }
  return out.str();
}

Dataset SynthData::load() const {
  return load_dataset_text(train_tsv(), valid_tsv(), test_tsv(), Granularity::index, 0);
}

void SynthData::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  auto put = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name);
    if (!out) throw InputError("cannot write " + (dir / name).string());
    out << text;
  };
  put("train.txt", train_tsv());
  put("valid.txt", valid_tsv());
  put("test.txt", test_tsv());
  put("instances.txt", instances_tsv());
}

std::vector<RuleInstance> read_instances(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("instances file not found: " + path.string());
  std::vector<RuleInstance> out;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::size_t id = 0;
    int hop = 0;
    NamedFact f;
    if (!(fields >> id >> hop >> f.subject >> f.relation >> f.object >> f.time)) {
      throw ParseError(line_number, "malformed instance line");
    }
    if (id >= out.size()) out.resize(id + 1);
    if (hop == 0) out[id].head = f;
    else out[id].body.push_back(f);
  }
  return out;
}

}  // namespace tpar
