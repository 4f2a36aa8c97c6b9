#pragma once

// Learnable parameters of the recursive path encoder and their checkpoint
// format.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "tpar/time_codec.hpp"

namespace tpar {

enum class Activation { identity, tanh, relu };

const char* to_string(Activation a) noexcept;
Activation parse_activation(std::string_view text);

struct ModelDims {
  std::int32_t num_entities = 0;
  std::int32_t num_base_relations = 0;  // R; embedding tables hold 2R + 1 columns
  int dim = 128;                        // d
  int attn_dim = 5;                     // d_a
  int max_length = 5;                   // L
  Activation activation = Activation::identity;
  bool shared_relations = false;  // one relation table for all steps
  bool scalar_time = false;       // one shared periodic frequency

  std::int32_t relation_table_size() const noexcept { return 2 * num_base_relations + 1; }
  RelationId identity_relation() const noexcept { return 2 * num_base_relations; }

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// Mutable view of one parameter tensor, flattened in storage order.
struct TensorView {
  std::string name;
  std::span<double> values;
};

struct ConstTensorView {
  std::string name;
  std::span<const double> values;
};

struct ModelParams {
  ModelDims dims;
  std::vector<Eigen::MatrixXd> relation_embeddings;  // per step: d x (2R+1), column r is h_r
  std::vector<Eigen::MatrixXd> aggregation;          // per step: d x d
  std::vector<Eigen::MatrixXd> attention_hidden;     // per step: d_a x 4d
  std::vector<Eigen::VectorXd> attention_out;        // per step: d_a
  TimeCodecParams time;
  Eigen::VectorXd score;  // d

  static ModelParams zeros(const ModelDims& dims);
  // Uniform(-1/sqrt(d), 1/sqrt(d)) for embeddings and matrices; time codec
  // per init_time_codec with the given span.
  static ModelParams init(const ModelDims& dims, std::uint64_t seed, TimeIndex time_span = 365);

  // 1-based step index.
  const Eigen::MatrixXd& relations(int step) const {
    return relation_embeddings[dims.shared_relations ? 0 : static_cast<std::size_t>(step - 1)];
  }
  Eigen::MatrixXd& relations(int step) {
    return relation_embeddings[dims.shared_relations ? 0 : static_cast<std::size_t>(step - 1)];
  }

  // Every tensor in declared (checkpoint) order.
  std::vector<TensorView> tensors();
  std::vector<ConstTensorView> tensors() const;
  std::size_t num_values() const;

  void set_zero();
  // this += scale * other; shapes must match.
  void add_scaled(const ModelParams& other, double scale);
  bool all_finite() const;
  // Throws ShapeError when any tensor disagrees with dims.
  void validate() const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary blob: magic "TPARCKPT", u32 version, dims header, then each tensor
// as (u64 count, count little-endian f64) in declared order. The sidecar
// `<path>.json` carries dims, activation and any extra metadata.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     std::string_view metadata_json = "{}");
ModelParams load_checkpoint(const std::filesystem::path& path);
std::vector<char> serialize_params(const ModelParams& params);
ModelParams deserialize_params(std::span<const char> bytes);

}  // namespace tpar
