#pragma once

#include <span>
#include <vector>

#include "proxylab/model/parameters.hpp"
#include "proxylab/model/transformer.hpp"
#include "proxylab/numerics/grad_check.hpp"

namespace proxylab::model {

template <typename T>
struct LossAndGradients {
  double loss = 0.0;
  std::vector<Tensor<T>> gradients;  ///< visit() order, zero when unused
};

template <typename T>
LossAndGradients<T> loss_and_gradients(const ModelParameters<T>& params,
                                       std::span<const std::span<const Token>> batch);

/// All parameters concatenated in visit() order.
template <typename T>
Tensor<T> flatten(const ModelParameters<T>& params);

template <typename T>
void unflatten(const Tensor<T>& flat, ModelParameters<T>& params);

/// loss(params) as a function of the flattened parameter vector, for
/// grad_check. The batch is copied into the closure.
ScalarFunction loss_function(const ModelConfig& config, std::vector<std::vector<Token>> batch);

}  // namespace proxylab::model
