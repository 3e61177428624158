#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "proxylab/code/corpus.hpp"
#include "proxylab/dyck/splits.hpp"
#include "proxylab/model/config.hpp"

namespace proxylab::workbench {

struct DyckSection {
  dyck::DyckSpec spec;
  dyck::SplitSizes sizes;
  int min_distance = 10;
  int short_max_len = 32;
};

struct CodeSection {
  std::string input;     ///< NDJSON with "language" and "code"
  std::string keywords;  ///< empty: bundled Java list
  code::IngestOptions ingest;
};

struct SimplifySection {
  int layer = 1;
  int head = 0;
  std::vector<std::string> kinds{"svd"};
  std::vector<int> ranks{1, 2, 4, 8, 16, 32};
  std::vector<int> clusters{2, 4, 8, 16, 32};
  std::string fit_split = "train";
  std::size_t fit_sequences = 1000;
};

struct EvaluateSection {
  /// Empty: every non-train split.
  std::vector<std::string> splits;
  bool correct_only = false;
  /// Sentences per split for evaluation; 0 = all.
  std::size_t subsample = 0;
  /// Sentences per split for the training curve.
  std::size_t curve_subsample = 2000;
};

struct ReportSection {
  std::vector<std::string> metrics{"same_prediction", "mean_jsd"};
  int gap_rank = 8;
};

struct InspectSection {
  std::string split;  ///< empty: iid (Dyck) or heldout (code)
  std::size_t sequences = 16;
  std::size_t first_n = 64;
  std::size_t charts = 4;
};

struct ExperimentConfig {
  std::string task = "dyck";  ///< "dyck" or "code"
  std::uint64_t seed = 0;
  std::string out = "out";
  int threads = 1;
  DyckSection dyck;
  CodeSection code;
  std::string model_preset;  ///< resolved preset name
  model::ModelConfig model;
  model::TrainConfig train;
  SimplifySection simplify;
  EvaluateSection evaluate;
  ReportSection report;
  InspectSection inspect;

  bool is_code() const { return task == "code"; }
  nlohmann::json to_json() const;
};

/// Thrown for schema violations; the message lists every offending key.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parses and validates a config document. Missing keys keep defaults; the
/// model section starts from a preset ("preset" key, default by task) and
/// its vocabulary size and length follow the task.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Writes <dir>/config.resolved.json with the workbench version.
void write_snapshot(const std::filesystem::path& dir, const ExperimentConfig& config,
                    const std::string& stage);

const char* version();

}  // namespace proxylab::workbench
