#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "proxylab/model/config.hpp"
#include "proxylab/numerics/tensor.hpp"

namespace proxylab::model {

template <typename T>
struct HeadParameters {
  Tensor<T> wq, wk, wv;  ///< d × d_h
  Tensor<T> wo;          ///< d_h × d
};

template <typename T>
struct LayerParameters {
  std::vector<HeadParameters<T>> heads;
  Tensor<T> ln1_scale, ln1_offset;  ///< attention sublayer norm
  Tensor<T> ln2_scale, ln2_offset;  ///< MLP sublayer norm
  Tensor<T> w1;                     ///< d × d_m
  Tensor<T> w2;                     ///< d_m × d
};

/// All learned weights. Layer-norm tensors are empty when the config has no
/// normalization; `final_*` exist only for pre-norm; `output` is empty when
/// the unembedding is tied to `token_embedding`.
template <typename T>
struct ModelParameters {
  ModelConfig config;
  Tensor<T> token_embedding;     ///< V × d
  Tensor<T> position_embedding;  ///< max_len × d
  std::vector<LayerParameters<T>> layers;
  Tensor<T> final_scale, final_offset;
  Tensor<T> output;  ///< V × d

  /// Calls f(name, tensor) for every present tensor in a fixed order.
  template <typename F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <typename F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    visit([&](const std::string&, const Tensor<T>& t) { n += t.size(); });
    return n;
  }

  /// The unembedding matrix θ (V × d).
  const Tensor<T>& unembedding() const {
    return config.tie_embeddings ? token_embedding : output;
  }

  template <typename U>
  ModelParameters<U> cast() const;

 private:
  template <typename Self, typename F>
  static void visit_impl(Self& self, F& f) {
    f("embed.token", self.token_embedding);
    f("embed.position", self.position_embedding);
    for (std::size_t l = 0; l < self.layers.size(); ++l) {
      auto& layer = self.layers[l];
      const std::string lp = "layer" + std::to_string(l) + ".";
      for (std::size_t h = 0; h < layer.heads.size(); ++h) {
        auto& head = layer.heads[h];
        const std::string hp = lp + "head" + std::to_string(h) + ".";
        f(hp + "wq", head.wq);
        f(hp + "wk", head.wk);
        f(hp + "wv", head.wv);
        f(hp + "wo", head.wo);
      }
      if (!layer.ln1_scale.empty()) {
        f(lp + "ln1.scale", layer.ln1_scale);
        f(lp + "ln1.offset", layer.ln1_offset);
        f(lp + "ln2.scale", layer.ln2_scale);
        f(lp + "ln2.offset", layer.ln2_offset);
      }
      f(lp + "mlp.w1", layer.w1);
      f(lp + "mlp.w2", layer.w2);
    }
    if (!self.final_scale.empty()) {
      f("final_ln.scale", self.final_scale);
      f("final_ln.offset", self.final_offset);
    }
    if (!self.output.empty()) f("unembed", self.output);
  }
};

/// Allocates zero tensors with the shapes implied by `config` (layer-norm
/// scales set to 1).
template <typename T>
ModelParameters<T> allocate_model(const ModelConfig& config);

/// Deterministic initialization: weight matrices ~ N(0, 1/fan_in), embeddings
/// ~ N(0, 1/d), layer-norm scale 1 and offset 0. Tensors are filled in
/// visit() order from one Rng(seed).
template <typename T>
ModelParameters<T> init_model(const ModelConfig& config, std::uint64_t seed);

/// Parameter count from the config alone.
std::size_t expected_parameter_count(const ModelConfig& config);

template <typename T>
template <typename U>
ModelParameters<U> ModelParameters<T>::cast() const {
  ModelParameters<U> out = allocate_model<U>(config);
  std::vector<const Tensor<T>*> src;
  visit([&](const std::string&, const Tensor<T>& t) { src.push_back(&t); });
  std::size_t i = 0;
  out.visit([&](const std::string&, Tensor<U>& t) { t = src[i++]->template cast<U>(); });
  return out;
}

}  // namespace proxylab::model
