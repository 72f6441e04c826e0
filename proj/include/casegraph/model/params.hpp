#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "casegraph/numerics/functional.hpp"
#include "casegraph/numerics/tensor.hpp"

namespace casegraph::model {

struct ModelConfig {
  std::size_t hidden_dim = 768;
  std::size_t gat_layers = 2;
  std::size_t gat_heads = 4;
  std::size_t xmodal_layers = 2;
  std::size_t xmodal_heads = 4;
  std::size_t num_classes = 0;  // 0: taken from the data
  std::size_t image_in_dim = 0;
  std::size_t text_in_dim = 0;
  double attn_dropout = 0.2;
  double mlp_dropout = 0.4;
  double leaky_slope = 0.2;
  double layer_norm_eps = 1e-5;
  numerics::ActivationKind node_activation = numerics::ActivationKind::Elu;
  // false bypasses graph propagation and cross-modal blocks: the knowledge
  // vector is the similarity-weighted mean of projected image embeddings and
  // the head sees concat(v_q, z_kg).
  bool knowledge_propagation = true;

  void validate() const;
  std::size_t fused_dim() const { return (knowledge_propagation ? 4 : 2) * hidden_dim; }
  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& doc);
std::string activation_name(numerics::ActivationKind kind);
numerics::ActivationKind activation_from_name(const std::string& name);

// Every trainable tensor, addressed by a stable dotted name. The set and
// order of tensors is fixed at construction.
class ModelParams {
 public:
  ModelParams() = default;
  // Glorot-uniform weights, zero biases, unit LayerNorm gains.
  ModelParams(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  std::uint64_t seed() const noexcept { return seed_; }

  numerics::Tensor& get(const std::string& name);
  const numerics::Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const std::vector<std::pair<std::string, numerics::Tensor>>& entries() const noexcept {
    return tensors_;
  }
  std::vector<numerics::Tensor*> tensors();
  std::size_t parameter_count() const;

  void zero_grad();
  bool operator==(const ModelParams& other) const;

  // Used by checkpoint loading; shapes must match the constructed layout.
  void assign(const std::string& name, numerics::Tensor value);

 private:
  void add(std::string name, numerics::Tensor tensor);

  ModelConfig config_;
  std::uint64_t seed_ = 0;
  std::vector<std::pair<std::string, numerics::Tensor>> tensors_;
  std::map<std::string, std::size_t> index_;
};

// Checkpoint: "MKGC" | version u32 | seed u64 | config-echo length u32 |
// config-echo JSON | tensor count u32 | per tensor: name length u32, name,
// rank u32, dims u64..., values f64. All little-endian.
struct Checkpoint {
  ModelParams params;
  std::string run_echo;  // free-form run configuration echo
};

std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params, const std::string& run_echo);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const ModelParams& params, const std::string& run_echo,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace casegraph::model
