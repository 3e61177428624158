#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "proxylab/model/parameters.hpp"
#include "proxylab/model/transformer.hpp"

namespace proxylab::model {

struct CurvePoint {
  std::size_t step = 0;
  std::string split;
  std::string metric;
  double value = 0.0;
};

struct StepInfo {
  std::size_t step = 0;
  double loss = 0.0;
  double learning_rate = 0.0;
};

struct TrainCallbacks {
  std::function<void(const StepInfo&)> on_step;
  /// Called every eval_every steps and after the final step.
  std::function<std::vector<CurvePoint>(std::size_t step, const ModelParameters<float>&)> evaluate;
  /// Called every checkpoint_every steps.
  std::function<void(std::size_t step, const ModelParameters<float>&)> on_checkpoint;
};

struct TrainResult {
  ModelParameters<float> params;
  std::vector<CurvePoint> curve;
  std::vector<double> losses;  ///< one per step
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t step, const std::string& what)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// AdamW on the mean per-sequence loss. Batches are drawn from a reshuffled
/// permutation of `sequences` (stream derive_seed(seed, "order")); weights
/// come from init_model(config, derive_seed(seed, "init")). A non-finite loss
/// writes `diagnostic_path` (when given) with the pre-step parameters and
/// throws TrainingDiverged.
TrainResult train(const ModelConfig& config, const TrainConfig& train_config,
                  std::span<const std::vector<Token>> sequences, const TrainCallbacks& callbacks = {},
                  const std::optional<std::filesystem::path>& diagnostic_path = std::nullopt);

/// One optimizer state per parameter tensor.
struct AdamWState {
  std::vector<std::vector<float>> m, v;
  std::size_t t = 0;
};

/// Applies one AdamW update: p -= lr * (m̂ / (sqrt(v̂) + eps) + wd * p).
void adamw_step(ModelParameters<float>& params, const std::vector<const Tensor<float>*>& grads,
                AdamWState& state, const TrainConfig& config, double lr);

/// step,split,metric,value
void write_curve_csv(const std::filesystem::path& path, const std::vector<CurvePoint>& curve);

}  // namespace proxylab::model
