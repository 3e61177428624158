#include "proxylab/model/parameters.hpp"

#include <cmath>

#include "proxylab/numerics/rng.hpp"

namespace proxylab::model {

template <typename T>
ModelParameters<T> allocate_model(const ModelConfig& c) {
  c.validate();
  const auto d = static_cast<std::size_t>(c.model_dim);
  const auto dh = static_cast<std::size_t>(c.head_dim);
  const auto dm = static_cast<std::size_t>(c.mlp_dim);
  const auto v = static_cast<std::size_t>(c.vocab_size);
  const bool norms = c.norm != NormPlacement::None;
  ModelParameters<T> p;
  p.config = c;
  p.token_embedding = Tensor<T>::matrix(v, d);
  p.position_embedding = Tensor<T>::matrix(static_cast<std::size_t>(c.max_len), d);
  p.layers.resize(static_cast<std::size_t>(c.layers));
  for (auto& layer : p.layers) {
    layer.heads.resize(static_cast<std::size_t>(c.heads));
    for (auto& head : layer.heads) {
      head.wq = Tensor<T>::matrix(d, dh);
      head.wk = Tensor<T>::matrix(d, dh);
      head.wv = Tensor<T>::matrix(d, dh);
      head.wo = Tensor<T>::matrix(dh, d);
    }
    if (norms) {
      layer.ln1_scale = Tensor<T>({d}, T{1});
      layer.ln1_offset = Tensor<T>({d});
      layer.ln2_scale = Tensor<T>({d}, T{1});
      layer.ln2_offset = Tensor<T>({d});
    }
    layer.w1 = Tensor<T>::matrix(d, dm);
    layer.w2 = Tensor<T>::matrix(dm, d);
  }
  if (c.norm == NormPlacement::Pre) {
    p.final_scale = Tensor<T>({d}, T{1});
    p.final_offset = Tensor<T>({d});
  }
  if (!c.tie_embeddings) p.output = Tensor<T>::matrix(v, d);
  return p;
}

template <typename T>
ModelParameters<T> init_model(const ModelConfig& config, std::uint64_t seed) {
  ModelParameters<T> p = allocate_model<T>(config);
  Rng rng(seed);
  const double embed_std = 1.0 / std::sqrt(static_cast<double>(config.model_dim));
  p.visit([&](const std::string& name, Tensor<T>& t) {
    if (name.find(".scale") != std::string::npos || name.find(".offset") != std::string::npos) {
      return;
    }
    double stddev = embed_std;
    if (name.rfind("embed.", 0) != 0 && name != "unembed") {
      stddev = 1.0 / std::sqrt(static_cast<double>(t.rows()));
    }
    for (T& x : t.values()) x = static_cast<T>(stddev * rng.normal());
  });
  return p;
}

std::size_t expected_parameter_count(const ModelConfig& c) {
  const std::size_t d = c.model_dim, dh = c.head_dim, dm = c.mlp_dim, v = c.vocab_size;
  std::size_t n = v * d + static_cast<std::size_t>(c.max_len) * d;
  std::size_t per_layer = static_cast<std::size_t>(c.heads) * 4 * d * dh + 2 * d * dm;
  if (c.norm != NormPlacement::None) per_layer += 4 * d;
  n += static_cast<std::size_t>(c.layers) * per_layer;
  if (c.norm == NormPlacement::Pre) n += 2 * d;
  if (!c.tie_embeddings) n += v * d;
  return n;
}

template ModelParameters<float> allocate_model<float>(const ModelConfig&);
template ModelParameters<double> allocate_model<double>(const ModelConfig&);
template ModelParameters<float> init_model<float>(const ModelConfig&, std::uint64_t);
template ModelParameters<double> init_model<double>(const ModelConfig&, std::uint64_t);

}  // namespace proxylab::model
