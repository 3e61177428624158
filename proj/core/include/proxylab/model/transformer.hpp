#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "proxylab/model/attention.hpp"
#include "proxylab/model/parameters.hpp"
#include "proxylab/numerics/rng.hpp"

namespace proxylab::model {

using Token = std::int32_t;

template <typename T>
struct HeadTrace {
  Tensor<T> queries;    ///< n × d_h, after any intervention transform
  Tensor<T> keys;       ///< n × d_h, after any intervention transform
  Tensor<T> attention;  ///< n × n, causal, rows sum to 1
  Tensor<T> outputs;    ///< n × d_h, attention-weighted values
};

/// Per (layer, head) internals of one sequence.
template <typename T>
struct AttentionTrace {
  int layers = 0;
  int heads = 0;
  std::vector<HeadTrace<T>> entries;  ///< index layer * heads + head

  HeadTrace<T>& at(int layer, int head) { return entries.at(index(layer, head)); }
  const HeadTrace<T>& at(int layer, int head) const { return entries.at(index(layer, head)); }

 private:
  std::size_t index(int layer, int head) const {
    if (layer < 0 || layer >= layers || head < 0 || head >= heads) {
      throw std::out_of_range("trace has no layer " + std::to_string(layer) + " head " +
                              std::to_string(head));
    }
    return static_cast<std::size_t>(layer * heads + head);
  }
};

template <typename T>
struct HeadHook {
  int layer = 0;
  int head = 0;
  const HeadIntervention<T>* intervention = nullptr;
};

template <typename T>
struct ForwardOptions {
  bool capture = false;
  /// Hooks on the same head apply in order.
  std::vector<HeadHook<T>> hooks;
  /// Dropout is active only when an Rng is supplied.
  Rng* dropout_rng = nullptr;
};

template <typename T>
struct PackedForward {
  Var logits;                              ///< rows × V on the tape
  std::vector<AttentionTrace<T>> traces;   ///< one per sequence when captured
  std::vector<Segment> segments;
};

/// Runs all sequences as one packed batch on `tape`. Parameters enter the
/// tape through `param_vars` (in visit() order) when non-empty, which is how
/// training obtains gradients; otherwise they are referenced as constants.
template <typename T>
PackedForward<T> forward_packed(Tape<T>& tape, const ModelParameters<T>& params,
                                std::span<const std::span<const Token>> sequences,
                                const ForwardOptions<T>& options,
                                std::span<const Var> param_vars = {});

template <typename T>
struct ForwardResult {
  Tensor<T> logits;  ///< n × V
  std::optional<AttentionTrace<T>> trace;
};

/// Inference on a single sequence.
template <typename T>
ForwardResult<T> forward(const ModelParameters<T>& params, std::span<const Token> tokens,
                         const ForwardOptions<T>& options = {});

/// Mean over sequences of the mean next-token NLL over positions 2..n.
/// Every sequence needs at least two tokens.
template <typename T>
double loss(const ModelParameters<T>& params, std::span<const std::span<const Token>> batch);

/// Adds the loss node for a packed forward; weights are 1 / (B (n_b - 1)).
template <typename T>
Var sequence_loss(Tape<T>& tape, Var logits, std::span<const std::span<const Token>> batch,
                  std::span<const Segment> segments);

}  // namespace proxylab::model
