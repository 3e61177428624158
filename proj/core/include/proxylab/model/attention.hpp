#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "proxylab/numerics/tape.hpp"

namespace proxylab::model {

/// A contiguous run of rows in a packed batch holding one sequence.
struct Segment {
  std::size_t offset = 0;
  std::size_t length = 0;
};

/// Hook that alters one attention head during inference. Transforms act on
/// the head's query/key rows before scores are formed.
template <typename T>
class HeadIntervention {
 public:
  virtual ~HeadIntervention() = default;
  virtual void transform_queries(Tensor<T>& /*queries*/) const {}
  virtual void transform_keys(Tensor<T>& /*keys*/) const {}
  /// Replace each softmax row with the indicator of its causal argmax
  /// (ties go to the largest position).
  virtual bool hard_attention() const { return false; }
  /// Drop the head's contribution to the residual stream.
  virtual bool zero_output() const { return false; }
};

template <typename T>
class ZeroHead final : public HeadIntervention<T> {
 public:
  bool zero_output() const override { return true; }
};

template <typename T>
class OneHotHead final : public HeadIntervention<T> {
 public:
  bool hard_attention() const override { return true; }
};

/// Causal scaled dot-product attention over packed segments:
/// out_i = sum_{j<=i} softmax_j(q_i·k_j / sqrt(d_h)) v_j within each segment.
/// When `attention_out` is non-null it receives one row-major n×n matrix per
/// segment (masked entries exactly 0).
template <typename T>
Var causal_attention(Tape<T>& tape, Var q, Var k, Var v, std::span<const Segment> segments,
                     bool hard, std::vector<Tensor<T>>* attention_out = nullptr);

}  // namespace proxylab::model
