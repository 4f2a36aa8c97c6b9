#include "tpar/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "tpar/errors.hpp"
#include "tpar/rng.hpp"

namespace tpar {

const char* to_string(Activation a) noexcept {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
  }
  return "identity";
}

Activation parse_activation(std::string_view text) {
  if (text == "identity") return Activation::identity;
  if (text == "tanh") return Activation::tanh;
  if (text == "relu") return Activation::relu;
  throw ConfigError("activation", "expected identity, tanh or relu, got '" + std::string(text) + "'");
}

namespace {

void check_dims(const ModelDims& dims) {
  if (dims.num_entities < 1) throw ShapeError("model: num_entities must be positive");
  if (dims.num_base_relations < 0) throw ShapeError("model: num_base_relations must be non-negative");
  if (dims.dim < 1 || dims.attn_dim < 1 || dims.max_length < 1) {
    throw ShapeError("model: dim, attn_dim and max_length must be positive");
  }
}

std::size_t relation_tables(const ModelDims& dims) {
  return dims.shared_relations ? 1 : static_cast<std::size_t>(dims.max_length);
}

}  // namespace

ModelParams ModelParams::zeros(const ModelDims& dims) {
  check_dims(dims);
  ModelParams p;
  p.dims = dims;
  const auto d = dims.dim;
  const auto steps = static_cast<std::size_t>(dims.max_length);
  p.relation_embeddings.assign(relation_tables(dims), Eigen::MatrixXd::Zero(d, dims.relation_table_size()));
  p.aggregation.assign(steps, Eigen::MatrixXd::Zero(d, d));
  p.attention_hidden.assign(steps, Eigen::MatrixXd::Zero(dims.attn_dim, 4 * d));
  p.attention_out.assign(steps, Eigen::VectorXd::Zero(dims.attn_dim));
  p.time = TimeCodecParams::zeros(d, dims.scalar_time);
  p.score = Eigen::VectorXd::Zero(d);
  return p;
}

ModelParams ModelParams::init(const ModelDims& dims, std::uint64_t seed, TimeIndex time_span) {
  ModelParams p = zeros(dims);
  Rng rng(mix_seeds(seed, 0x1417));
  const double bound = 1.0 / std::sqrt(static_cast<double>(dims.dim));
  auto fill = [&](auto& tensor) {
    for (Eigen::Index i = 0; i < tensor.size(); ++i) tensor.data()[i] = rng.uniform(-bound, bound);
  };
  for (auto& m : p.relation_embeddings) fill(m);
  for (auto& m : p.aggregation) fill(m);
  for (auto& m : p.attention_hidden) fill(m);
  for (auto& v : p.attention_out) fill(v);
  fill(p.score);
  p.time = init_time_codec(dims.dim, mix_seeds(seed, 0x7c0dec), time_span, dims.scalar_time);
  return p;
}

namespace {

template <class View, class Self>
std::vector<View> collect_tensors(Self& self) {
  std::vector<View> out;
  auto add = [&](std::string name, auto& tensor) {
    out.push_back({std::move(name), {tensor.data(), static_cast<std::size_t>(tensor.size())}});
  };
  for (std::size_t i = 0; i < self.relation_embeddings.size(); ++i)
    add("relation_embeddings[" + std::to_string(i) + "]", self.relation_embeddings[i]);
  for (std::size_t i = 0; i < self.aggregation.size(); ++i)
    add("aggregation[" + std::to_string(i) + "]", self.aggregation[i]);
  for (std::size_t i = 0; i < self.attention_hidden.size(); ++i)
    add("attention_hidden[" + std::to_string(i) + "]", self.attention_hidden[i]);
  for (std::size_t i = 0; i < self.attention_out.size(); ++i)
    add("attention_out[" + std::to_string(i) + "]", self.attention_out[i]);
  add("time.omega_p", self.time.omega_p);
  add("time.phi_p", self.time.phi_p);
  add("time.omega_np", self.time.omega_np);
  add("time.phi_np", self.time.phi_np);
  add("score", self.score);
  return out;
}

}  // namespace

std::vector<TensorView> ModelParams::tensors() { return collect_tensors<TensorView>(*this); }
std::vector<ConstTensorView> ModelParams::tensors() const { return collect_tensors<ConstTensorView>(*this); }

std::size_t ModelParams::num_values() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.values.size();
  return n;
}

void ModelParams::set_zero() {
  for (auto& t : tensors()) std::fill(t.values.begin(), t.values.end(), 0.0);
}

void ModelParams::add_scaled(const ModelParams& other, double scale) {
  auto mine = tensors();
  const auto theirs = other.tensors();
  if (mine.size() != theirs.size()) throw ShapeError("add_scaled: tensor count mismatch");
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i].values.size() != theirs[i].values.size()) {
      throw ShapeError("add_scaled: shape mismatch in " + mine[i].name);
    }
    for (std::size_t k = 0; k < mine[i].values.size(); ++k) mine[i].values[k] += scale * theirs[i].values[k];
  }
}

bool ModelParams::all_finite() const {
  for (const auto& t : tensors()) {
    for (double v : t.values) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

void ModelParams::validate() const {
  check_dims(dims);
  const auto d = dims.dim;
  const auto steps = static_cast<std::size_t>(dims.max_length);
  if (relation_embeddings.size() != relation_tables(dims) || aggregation.size() != steps ||
      attention_hidden.size() != steps || attention_out.size() != steps) {
    throw ShapeError("model: per-step tensor count does not match max_length");
  }
  for (const auto& m : relation_embeddings) {
    if (m.rows() != d || m.cols() != dims.relation_table_size()) throw ShapeError("model: relation table shape");
  }
  for (const auto& m : aggregation) {
    if (m.rows() != d || m.cols() != d) throw ShapeError("model: aggregation matrix shape");
  }
  for (const auto& m : attention_hidden) {
    if (m.rows() != dims.attn_dim || m.cols() != 4 * d) throw ShapeError("model: attention matrix shape");
  }
  for (const auto& v : attention_out) {
    if (v.size() != dims.attn_dim) throw ShapeError("model: attention vector shape");
  }
  if (score.size() != d || time.dim() != d) throw ShapeError("model: score/time dimension");
  time.validate();
  if (!all_finite()) throw ShapeError("model: non-finite parameter");
}

// ---------------------------------------------------------------------------
// Checkpoint

namespace {

constexpr char kMagic[8] = {'T', 'P', 'A', 'R', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes little-endian");

template <class T>
void put(std::vector<char>& out, T value) {
  const auto* p = reinterpret_cast<const char*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const char> bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw CheckpointError("checkpoint truncated");
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<char> serialize_params(const ModelParams& params) {
  std::vector<char> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  const auto& d = params.dims;
  put<std::int32_t>(out, d.num_entities);
  put<std::int32_t>(out, d.num_base_relations);
  put<std::int32_t>(out, d.dim);
  put<std::int32_t>(out, d.attn_dim);
  put<std::int32_t>(out, d.max_length);
  put<std::int32_t>(out, static_cast<std::int32_t>(d.activation));
  put<std::uint8_t>(out, d.shared_relations ? 1 : 0);
  put<std::uint8_t>(out, d.scalar_time ? 1 : 0);
  for (const auto& t : params.tensors()) {
    put<std::uint64_t>(out, t.values.size());
    for (double v : t.values) put<double>(out, v);
  }
  return out;
}

ModelParams deserialize_params(std::span<const char> bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw CheckpointError("not a tpar checkpoint (bad magic)");
  }
  Reader r(bytes.subspan(sizeof kMagic));
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  ModelDims dims;
  dims.num_entities = r.get<std::int32_t>();
  dims.num_base_relations = r.get<std::int32_t>();
  dims.dim = r.get<std::int32_t>();
  dims.attn_dim = r.get<std::int32_t>();
  dims.max_length = r.get<std::int32_t>();
  const auto act = r.get<std::int32_t>();
  if (act < 0 || act > 2) throw CheckpointError("bad activation code in checkpoint");
  dims.activation = static_cast<Activation>(act);
  dims.shared_relations = r.get<std::uint8_t>() != 0;
  dims.scalar_time = r.get<std::uint8_t>() != 0;
  ModelParams params;
  try {
    params = ModelParams::zeros(dims);
  } catch (const ShapeError& e) {
    throw CheckpointError(std::string("bad dims header: ") + e.what());
  }
  for (auto& t : params.tensors()) {
    const auto count = r.get<std::uint64_t>();
    if (count != t.values.size()) throw CheckpointError("tensor " + t.name + " has unexpected size");
    for (double& v : t.values) v = r.get<double>();
  }
  if (!r.done()) throw CheckpointError("trailing bytes after last tensor");
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, std::string_view metadata_json) {
  const auto bytes = serialize_params(params);
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot write checkpoint: " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  nlohmann::ordered_json meta;
  meta["format"] = "tpar-checkpoint";
  meta["version"] = kCheckpointVersion;
  const auto& d = params.dims;
  meta["dims"] = {{"num_entities", d.num_entities}, {"num_base_relations", d.num_base_relations},
                  {"dim", d.dim}, {"attn_dim", d.attn_dim}, {"max_length", d.max_length},
                  {"shared_relations", d.shared_relations}, {"scalar_time", d.scalar_time}};
  meta["activation"] = to_string(d.activation);
  meta["metadata"] = nlohmann::ordered_json::parse(metadata_json.empty() ? "{}" : metadata_json);
  std::ofstream side(path.string() + ".json");
  if (!side) throw CheckpointError("cannot write checkpoint sidecar for " + path.string());
  side << meta.dump(2) << '\n';
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint not found: " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_params(bytes);
}

}  // namespace tpar
