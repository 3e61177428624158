#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "proxylab/faithfulness/metrics.hpp"

namespace proxylab::faithfulness {

enum class Role { Key, Query };
const char* to_string(Role role);

/// One embedding projected onto chosen basis columns.
struct ProjectedPoint {
  std::size_t sequence = 0;
  std::size_t position = 0;
  Role role = Role::Key;
  Token token = 0;
  int token_depth = 0;
  int prefix_depth = 0;
  int bracket_type = 0;  ///< 0 for BOS/EOS
  std::vector<double> coords;
  double norm = 0.0;  ///< of the full (unprojected) embedding
};

struct ProjectionTable {
  std::vector<std::size_t> components;  ///< 0-based basis columns
  std::vector<ProjectedPoint> points;
};

/// Coordinates of every key and query of (layer, head) on the requested
/// columns of `basis` (d_h × r). Throws when a component is >= r.
ProjectionTable export_projection(const model::ModelParameters<float>& params, int layer,
                                  int head, const Tensor<float>& basis,
                                  const dyck::Dataset& dataset,
                                  const std::vector<std::size_t>& components, int threads = 1);

/// Logistic regression of token-depth parity (odd = 1) on the coordinates,
/// fitted by Newton's method with a small ridge term. Returns the training
/// accuracy. Points at depth 0 are skipped.
struct ParityFit {
  std::vector<double> weights;  ///< bias first
  Fraction accuracy;
};
ParityFit depth_parity_classifier(const ProjectionTable& table, Role role);

struct ClusterProfile {
  /// Per query cluster: token-depth histogram (index = depth).
  std::vector<std::vector<std::size_t>> query_depths;
  std::vector<std::vector<std::size_t>> key_depths;
  /// Nearest key cluster (Euclidean center distance) of each query cluster.
  std::vector<std::size_t> nearest_key;

  /// Modal depth of a histogram; ties to the shallower depth, -1 when empty.
  static int mode(const std::vector<std::size_t>& histogram);
  /// Query clusters whose nearest key cluster has the same modal depth.
  Fraction matching_modes() const;
};

/// Assignment-level profile from precomputed embeddings and depth labels.
ClusterProfile cluster_depth_profile(const Tensor<float>& key_centers,
                                     const Tensor<float>& query_centers,
                                     const Tensor<double>& keys, const Tensor<double>& queries,
                                     const std::vector<int>& depths);

ClusterProfile cluster_depth_profile(const simplify::FittedSimplifier& fitted,
                                     const model::ModelParameters<float>& params,
                                     const dyck::Dataset& dataset, int threads = 1);

/// Token depth of every position, concatenated in collect_embeddings order.
std::vector<int> token_depth_labels(const dyck::Dataset& dataset);

/// Fits the largest requested SVD rank once and truncates; refits k-means per
/// k; one-hot has a single strength 0. Returns one record per (strength,
/// eval set) in that order.
std::vector<FaithfulnessRecord> sweep(const model::ModelParameters<float>& params,
                                      const simplify::SimplifierSpec& base,
                                      const std::vector<int>& strengths,
                                      const std::vector<std::vector<Token>>& fit_sequences,
                                      const std::vector<EvalSet>& evals,
                                      const EvalOptions& options = {});

}  // namespace proxylab::faithfulness
