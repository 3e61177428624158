#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "proxylab/model/runner.hpp"

namespace proxylab::simplify {

using model::Token;

enum class Kind { Svd, KMeans, OneHot };

std::string to_string(Kind kind);
Kind kind_from(const std::string& name);

struct FitSample {
  std::string dataset = "train";
  std::size_t sequences = 1000;
  std::uint64_t seed = 0;
};

struct SimplifierSpec {
  int layer = 1;  ///< 0-based
  int head = 0;   ///< 0-based
  Kind kind = Kind::Svd;
  /// SVD rank or number of clusters per role; unused for one-hot.
  int strength = 0;
  FitSample fit;

  void validate(const model::ModelConfig& config) const;
  /// e.g. "svd", "kmeans", "onehot"
  std::string kind_name() const { return to_string(kind); }
};

struct FittedSimplifier {
  SimplifierSpec spec;
  /// SVD: d_h × r orthonormal basis (leading right singular vectors).
  Tensor<float> basis;
  /// SVD: singular values of the stacked key/query matrix (all of them).
  std::vector<double> singular_values;
  /// k-means: k × d_h centers per role.
  Tensor<float> key_centers;
  Tensor<float> query_centers;
  /// Provenance: number of sequences and embedding rows per role.
  std::size_t fit_sequences = 0;
  std::size_t fit_rows = 0;
};

/// Sequences used for fitting: `spec.fit.sequences` drawn without replacement
/// from `pool` using a shuffle seeded by spec.fit.seed (all of them when the
/// pool is smaller).
std::vector<std::vector<Token>> select_fit_sequences(const std::vector<std::vector<Token>>& pool,
                                                     const FitSample& sample);

struct Embeddings {
  Tensor<double> keys;     ///< rows × d_h
  Tensor<double> queries;  ///< rows × d_h
};

/// Keys and queries of one head at every position of every sequence
/// (BOS/EOS included).
Embeddings collect_embeddings(const model::ModelParameters<float>& params, int layer, int head,
                              const std::vector<std::vector<Token>>& sequences, int threads = 1);

/// SVD on the row-stacked [keys; queries]; k-means per role; nothing for
/// one-hot. Throws when the rank exceeds the numerical rank of the data or
/// the cluster count exceeds the number of embeddings.
FittedSimplifier fit(const SimplifierSpec& spec, const model::ModelParameters<float>& params,
                     const std::vector<std::vector<Token>>& fit_sequences, int threads = 1);

/// Fit from precomputed embeddings.
FittedSimplifier fit_embeddings(const SimplifierSpec& spec, const Embeddings& embeddings,
                                std::size_t fit_sequences);

/// Leading `rank` columns of an SVD fit (rank <= current rank).
FittedSimplifier truncate(const FittedSimplifier& svd_fit, int rank);

/// The intervention realizing a fitted simplifier on its head.
class SimplifierIntervention final : public model::HeadIntervention<float> {
 public:
  explicit SimplifierIntervention(const FittedSimplifier& fitted);

  void transform_queries(Tensor<float>& queries) const override;
  void transform_keys(Tensor<float>& keys) const override;
  bool hard_attention() const override { return kind_ == Kind::OneHot; }

 private:
  Kind kind_;
  Tensor<float> projection_;  ///< d_h × d_h, U_r U_rᵀ
  Tensor<float> key_centers_;
  Tensor<float> query_centers_;
};

/// Nearest row of `centers`, ties to the lowest index.
std::size_t nearest_row(const Tensor<float>& centers, const float* point);

/// The original model with one head simplified.
class SimplifiedRunner final : public model::Runner {
 public:
  SimplifiedRunner(const model::ModelParameters<float>& params, const FittedSimplifier& fitted,
                   std::vector<model::HeadHook<float>> extra_hooks = {});

  model::ForwardResult<float> run(std::span<const Token> tokens, bool capture) const override;

  const FittedSimplifier& fitted() const { return fitted_; }

 private:
  const model::ModelParameters<float>& params_;
  const FittedSimplifier& fitted_;
  SimplifierIntervention intervention_;
  std::vector<model::HeadHook<float>> extra_hooks_;
};

model::ForwardResult<float> run_simplified(const model::ModelParameters<float>& params,
                                           const FittedSimplifier& fitted,
                                           std::span<const Token> tokens);

/// Same container as checkpoints, kind "simplifier".
void save_fitted(const std::filesystem::path& path, const FittedSimplifier& fitted);
FittedSimplifier load_fitted(const std::filesystem::path& path);

}  // namespace proxylab::simplify
