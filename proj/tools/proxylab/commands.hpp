#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "experiment.hpp"

namespace proxylab::workbench {

/// Per-invocation inputs beyond the config.
struct Inputs {
  std::optional<std::filesystem::path> data;        ///< split bundle / code split dir
  std::optional<std::filesystem::path> checkpoint;  ///< default <out>/train/final.ckpt
  std::vector<std::filesystem::path> fitted;        ///< default: <out>/simplifiers index
  std::optional<int> layer;
  std::optional<int> head;
  bool quiet = false;
};

int gen_data(const ExperimentConfig& config, const Inputs& inputs);
int code_ingest(const ExperimentConfig& config, const Inputs& inputs);
int train(const ExperimentConfig& config, const Inputs& inputs);
int fit_simplifier(const ExperimentConfig& config, const Inputs& inputs);
int evaluate(const ExperimentConfig& config, const Inputs& inputs);
int sweep(const ExperimentConfig& config, const Inputs& inputs);
int report(const ExperimentConfig& config, const Inputs& inputs);
int inspect_head(const ExperimentConfig& config, const Inputs& inputs);

}  // namespace proxylab::workbench
