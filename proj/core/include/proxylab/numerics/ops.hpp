#pragma once

#include <cstdint>
#include <span>

#include "proxylab/numerics/rng.hpp"
#include "proxylab/numerics/tape.hpp"

// Differentiable tensor primitives recorded on a Tape. Rank-1 operands are
// treated as a single row.
namespace proxylab::ops {

template <typename T> Var add(Tape<T>& tape, Var a, Var b);
template <typename T> Var mul(Tape<T>& tape, Var a, Var b);
template <typename T> Var scale(Tape<T>& tape, Var a, T factor);

/// x(n×d) + bias(d) broadcast over rows.
template <typename T> Var add_row(Tape<T>& tape, Var x, Var bias);

/// A(m×k) · B(k×n)
template <typename T> Var matmul(Tape<T>& tape, Var a, Var b);
/// A(m×k) · B(n×k)ᵀ
template <typename T> Var matmul_nt(Tape<T>& tape, Var a, Var b);

template <typename T> Var relu(Tape<T>& tape, Var x);
template <typename T> Var tanh(Tape<T>& tape, Var x);

/// Sum of all entries, shape {1}.
template <typename T> Var sum(Tape<T>& tape, Var x);

/// Row gather: out[i] = table[ids[i]].
template <typename T>
Var gather_rows(Tape<T>& tape, Var table, std::span<const std::int32_t> ids);

/// Per-row layer normalization with learned scale and offset.
template <typename T>
Var layer_norm(Tape<T>& tape, Var x, Var scale, Var offset, T eps = T(1e-5));

/// Inverted dropout; identity when rate == 0.
template <typename T> Var dropout(Tape<T>& tape, Var x, double rate, Rng& rng);

/// Weighted softmax cross-entropy. Rows with a negative target are ignored.
/// Returns sum_r weight[r] * -log softmax(logits[r])[target[r]], shape {1}.
template <typename T>
Var cross_entropy(Tape<T>& tape, Var logits, std::span<const std::int32_t> targets,
                  std::span<const double> weights);

}  // namespace proxylab::ops
