#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "proxylab/dyck/splits.hpp"
#include "proxylab/model/train.hpp"
#include "proxylab/model/transformer.hpp"

namespace proxylab::model {

/// Anything that maps a token sequence to next-token logits (and optionally
/// its attention internals): the trained model, a simplified proxy, or an
/// oracle in tests.
class Runner {
 public:
  virtual ~Runner() = default;
  virtual ForwardResult<float> run(std::span<const Token> tokens, bool capture) const = 0;
};

class ModelRunner final : public Runner {
 public:
  explicit ModelRunner(const ModelParameters<float>& params,
                       std::vector<HeadHook<float>> hooks = {})
      : params_(params), hooks_(std::move(hooks)) {}

  ForwardResult<float> run(std::span<const Token> tokens, bool capture) const override;

  const ModelParameters<float>& params() const { return params_; }
  const std::vector<HeadHook<float>>& hooks() const { return hooks_; }

 private:
  const ModelParameters<float>& params_;
  std::vector<HeadHook<float>> hooks_;
};

/// hits / total, undefined when nothing was counted.
struct Fraction {
  std::size_t hits = 0;
  std::size_t total = 0;

  std::optional<double> value() const {
    if (total == 0) return std::nullopt;
    return static_cast<double>(hits) / static_cast<double>(total);
  }
  Fraction& operator+=(const Fraction& o) {
    hits += o.hits;
    total += o.total;
    return *this;
  }
};

/// The k closer token ids, ascending.
std::vector<Token> closer_tokens(int bracket_types);

/// Highest-logit candidate; ties go to the earliest candidate.
Token restricted_argmax(std::span<const float> logits, std::span<const Token> candidates);

/// Full-vocabulary argmax; ties go to the lowest id.
Token argmax(std::span<const float> logits);

/// Prediction for the closer at position i, read from the logits at i-1.
Token predicted_closer(const Tensor<float>& logits, std::size_t position,
                       std::span<const Token> closers);

/// Accuracy of restricted-argmax closer prediction at the long-range eval
/// positions of every sample.
Fraction closing_bracket_accuracy(const Runner& runner, const dyck::Dataset& dataset,
                                  int min_distance = 10, int threads = 1);

/// Token sequences of a dataset, for training.
std::vector<std::vector<Token>> token_sequences(const dyck::Dataset& dataset);

/// Closing-bracket accuracy of `params` on the first `subsample` sentences of
/// every split, as curve points (split, "closing_accuracy"). Splits with no
/// eval positions are skipped.
std::vector<CurvePoint> closing_accuracy_curve(const ModelParameters<float>& params,
                                               const dyck::SplitBundle& bundle, std::size_t step,
                                               std::size_t subsample = 2000, int threads = 1);

}  // namespace proxylab::model
