#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "proxylab/model/runner.hpp"
#include "proxylab/simplify/simplifier.hpp"

namespace proxylab::faithfulness {

using model::Fraction;
using model::Token;

/// Sequences plus the target positions scored in each. A target i is
/// predicted from the logits at i-1. `candidates` restricts the argmax
/// (Dyck closers); empty means the full vocabulary.
struct EvalSet {
  std::string name;
  std::vector<std::vector<Token>> sequences;
  std::vector<std::vector<std::size_t>> positions;
  std::vector<Token> candidates;

  std::size_t n_positions() const;
};

/// Long-range closers (distance >= min_distance) with restricted argmax.
EvalSet dyck_eval_set(const dyck::Dataset& dataset, int min_distance = 10);

/// Every position after BOS, full-vocabulary argmax.
EvalSet all_positions_eval_set(std::string name, std::vector<std::vector<Token>> sequences);

struct EvalOptions {
  /// Score same-prediction only where the original model is correct.
  bool original_correct_only = false;
  int threads = 1;
};

/// Which proxy a record describes.
struct RecordKey {
  std::string split;
  std::string simplifier;  ///< "svd", "kmeans", "onehot", or a free label
  int strength = 0;
  int layer = 0;
  int head = 0;
};

struct FaithfulnessRecord {
  RecordKey key;
  bool original_correct_only = false;

  /// JSD of the target head's attention rows, pooled over every query row.
  double jsd_sum = 0.0;
  std::size_t jsd_rows = 0;
  /// Same, restricted to the query rows that predict an eval target.
  double jsd_eval_sum = 0.0;
  std::size_t jsd_eval_rows = 0;

  /// Task rule at eval positions (after the optional correct-only filter).
  Fraction same_prediction;
  /// Full-vocabulary argmax at every query row.
  Fraction same_prediction_full;
  Fraction accuracy_original;
  Fraction accuracy_simplified;
  std::size_t n_eval_positions = 0;

  std::optional<double> mean_jsd() const;
  std::optional<double> mean_jsd_eval() const;

  /// Count-weighted merge of the counts; the key is left as is.
  FaithfulnessRecord& operator+=(const FaithfulnessRecord& other);
};

/// Compares two runners that share parameters and differ at (layer, head).
FaithfulnessRecord evaluate_faithfulness(const model::Runner& original,
                                         const model::Runner& simplified, const EvalSet& eval,
                                         const RecordKey& key, const EvalOptions& options = {});

/// Convenience: original model vs. the fitted proxy.
FaithfulnessRecord evaluate_faithfulness(const model::ModelParameters<float>& params,
                                         const simplify::FittedSimplifier& fitted,
                                         const EvalSet& eval, const EvalOptions& options = {});

/// Accuracy per (token depth of the target closer, max prefix depth of the
/// sequence). Cells with no positions are absent.
struct DepthErrorGrid {
  std::map<std::pair<int, int>, Fraction> cells;

  std::optional<double> accuracy(int query_depth, int max_depth) const;
  /// Sum over cells.
  Fraction total() const;
};

DepthErrorGrid depth_error_grid(const model::Runner& runner, const dyck::Dataset& dataset,
                                int min_distance = 10, int threads = 1);

/// Built from the eval positions where the simplified runner predicts wrong.
/// Depth: (target depth, depth of the key the simplified head attends to
/// most) -> count. Offset: simplified argmax key position minus original
/// argmax key position -> count. The query row is the one predicting the
/// target. Attention ties go to the latest position.
struct AttentionErrorProfile {
  std::map<std::pair<int, int>, std::size_t> depth;
  std::map<long, std::size_t> offset;
  std::size_t positions = 0;

  /// attended depth - target depth -> count.
  std::map<int, std::size_t> depth_difference() const;
  /// Fraction of nonzero offsets that are even; undefined with none.
  Fraction even_nonzero_offsets() const;
};

AttentionErrorProfile attention_error_profile(const model::Runner& original,
                                              const model::Runner& simplified, int layer,
                                              int head, const dyck::Dataset& dataset,
                                              int min_distance = 10, int threads = 1);

AttentionErrorProfile attention_error_profile(const model::ModelParameters<float>& params,
                                              const simplify::FittedSimplifier& fitted,
                                              const dyck::Dataset& dataset,
                                              int min_distance = 10, int threads = 1);

/// Index of the largest entry of an attention row, ties to the latest.
std::size_t attention_argmax(std::span<const float> row);

}  // namespace proxylab::faithfulness
