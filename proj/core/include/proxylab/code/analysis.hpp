#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "proxylab/code/corpus.hpp"
#include "proxylab/model/runner.hpp"
#include "proxylab/simplify/simplifier.hpp"

namespace proxylab::code {

using model::Fraction;

struct PairedTestResult {
  double t = 0.0;
  double p = 1.0;  ///< two-sided
  std::size_t n = 0;
  double mean_difference = 0.0;
  double dof = 0.0;
  /// Zero variance of the differences: p is 0 (nonzero mean) or 1 (zero mean).
  bool degenerate = false;
};

/// Paired t-test on in_domain[i] - out_domain[i]. Needs n >= 2 equal-length samples.
PairedTestResult paired_t_test(std::span<const double> in_domain, std::span<const double> out_domain);

/// Next-character accuracy per category at character positions (target i
/// predicted from the logits at i-1, full-vocabulary argmax).
struct CategoryAccuracy {
  Fraction per_category[kCategoryCount];
  Fraction overall;
};
CategoryAccuracy category_accuracy(const model::Runner& runner, const CodeSplit& split,
                                   int threads = 1);

/// Character positions (1..len) of every function, as a faithfulness eval set.
std::vector<std::vector<std::size_t>> character_positions(const CodeSplit& split);

struct HeadSweepRecord {
  int layer = 0;
  int head = 0;
  int rank = 0;
  std::string split;
  std::string category;  ///< a Category name or "all"
  Fraction same;          ///< same prediction at every character
  Fraction same_correct;  ///< restricted to positions the original gets right
};

struct SweepOptions {
  std::vector<int> ranks{1, 2, 4, 8, 16, 32, 64};
  std::size_t fit_sequences = 1000;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// For every (layer, head): fit SVD on keys/queries of `fit_split` at the
/// largest rank, then truncate to each rank and compare against the
/// original on every split. Records come in (layer, head, rank, split,
/// category) order with "all" first.
std::vector<HeadSweepRecord> per_head_sweep(const model::ModelParameters<float>& params,
                                            const CodeSplit& fit_split,
                                            const std::vector<const CodeSplit*>& splits,
                                            const SweepOptions& options);

/// rate(in_split) - pooled rate(out_splits) for one (layer, head, rank,
/// category); undefined when either side has no positions.
std::optional<double> generalization_gap(const std::vector<HeadSweepRecord>& records, int layer,
                                         int head, int rank, const std::string& category,
                                         const std::string& in_split,
                                         const std::vector<std::string>& out_splits,
                                         bool correct_only = true);

/// layer,head,rank,split,category,same_hits,same_total,same_rate,correct_hits,correct_total,correct_rate
void write_head_sweep_csv(std::ostream& out, const std::vector<HeadSweepRecord>& records);

std::vector<HeadSweepRecord> read_head_sweep_csv(const std::filesystem::path& path);

/// Head-averaged same-prediction rates of one run at one rank (category
/// "all"): in-domain on `in_split`, out-of-domain pooled over `out_splits`.
/// These are the per-run pairs of the significance test.
struct RunScores {
  std::optional<double> in_domain;
  std::optional<double> out_domain;
};
RunScores head_averaged_scores(const std::vector<HeadSweepRecord>& records, int rank,
                               const std::string& in_split,
                               const std::vector<std::string>& out_splits,
                               bool correct_only = true);

/// split,category,hits,total,accuracy
void write_category_csv(std::ostream& out, const std::string& split, const CategoryAccuracy& acc);

struct HeadInspection {
  /// Attention over the first `first_n` positions of each sequence.
  std::vector<Tensor<float>> attention;
  /// Mean mass on position i-1, over i >= 1.
  std::size_t previous_token_count = 0;
  double previous_token_sum = 0.0;
  /// Mean mass on positions j+1 for earlier occurrences j < i of token i,
  /// over positions i that have one.
  std::size_t induction_count = 0;
  double induction_sum = 0.0;

  std::optional<double> previous_token_score() const;
  std::optional<double> induction_score() const;
};

/// Positions j+1 (j < i, tokens[j] == tokens[i], j+1 <= i) for query i.
std::vector<std::size_t> induction_targets(std::span<const Token> tokens, std::size_t i);

/// Scores of an attention matrix (n × n, causal) for its token sequence.
void accumulate_head_scores(HeadInspection& inspection, const Tensor<float>& attention,
                            std::span<const Token> tokens);

HeadInspection inspect_head(const model::ModelParameters<float>& params, int layer, int head,
                            const std::vector<std::vector<Token>>& sequences,
                            std::size_t first_n = 64, int threads = 1);

}  // namespace proxylab::code
