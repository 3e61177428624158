#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace proxylab::model {

enum class NormPlacement { Pre, Post, None };

std::string to_string(NormPlacement p);
NormPlacement norm_placement_from(std::string_view s);

struct ModelConfig {
  int layers = 2;
  int heads = 1;
  int model_dim = 32;
  int head_dim = 32;
  int mlp_dim = 128;
  int max_len = 512;
  int vocab_size = 42;
  double dropout = 0.0;
  bool tie_embeddings = true;
  NormPlacement norm = NormPlacement::Pre;

  void validate() const;

  /// Two layers, one head, d = d_h = 32, d_m = 128, no dropout.
  static ModelConfig dyck(int vocab_size, int max_len = 512);
  /// Four layers, four heads, d = 256, d_h = 64, d_m = 512, dropout 0.1.
  static ModelConfig code_full(int vocab_size, int max_len);
  /// Two layers, two heads, d = 128, d_h = 64, d_m = 512, dropout 0.1.
  static ModelConfig code_desk(int vocab_size, int max_len);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TrainConfig {
  std::size_t steps = 20000;
  std::size_t batch_size = 128;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  double weight_decay = 1e-4;
  std::size_t warmup_steps = 2000;
  double peak_lr = 5e-3;
  std::uint64_t seed = 0;
  /// 0 disables periodic evaluation.
  std::size_t eval_every = 1000;
  /// 0 disables periodic checkpoints.
  std::size_t checkpoint_every = 0;

  void validate() const;
  /// peak * min(step / warmup, sqrt(warmup / step)), step counted from 1.
  double learning_rate(std::size_t step) const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// JSON object text for the header of checkpoints and config snapshots.
std::string to_json(const ModelConfig& config);
std::string to_json(const TrainConfig& config);
/// Unknown keys are rejected; missing keys keep their defaults.
ModelConfig model_config_from_json(std::string_view text);
TrainConfig train_config_from_json(std::string_view text);

}  // namespace proxylab::model
