#include "proxylab/model/transformer.hpp"

#include <stdexcept>

#include "proxylab/numerics/ops.hpp"

namespace proxylab::model {
namespace {

struct HeadVars {
  Var wq, wk, wv, wo;
};

struct LayerVars {
  std::vector<HeadVars> heads;
  Var ln1_scale, ln1_offset, ln2_scale, ln2_offset, w1, w2;
};

struct ParamVars {
  Var token, position;
  std::vector<LayerVars> layers;
  Var final_scale, final_offset, unembed;
};

template <typename T>
ParamVars bind(Tape<T>& tape, const ModelParameters<T>& p, std::span<const Var> given) {
  std::vector<Var> vars;
  if (given.empty()) {
    p.visit([&](const std::string&, const Tensor<T>& t) { vars.push_back(tape.reference(t)); });
  } else {
    vars.assign(given.begin(), given.end());
  }
  std::size_t i = 0;
  auto next = [&] {
    if (i >= vars.size()) throw std::invalid_argument("forward: too few parameter variables");
    return vars[i++];
  };
  ParamVars pv;
  pv.token = next();
  pv.position = next();
  for (const auto& layer : p.layers) {
    LayerVars lv;
    for (std::size_t h = 0; h < layer.heads.size(); ++h) {
      HeadVars hv;
      hv.wq = next();
      hv.wk = next();
      hv.wv = next();
      hv.wo = next();
      lv.heads.push_back(hv);
    }
    if (!layer.ln1_scale.empty()) {
      lv.ln1_scale = next();
      lv.ln1_offset = next();
      lv.ln2_scale = next();
      lv.ln2_offset = next();
    }
    lv.w1 = next();
    lv.w2 = next();
    pv.layers.push_back(std::move(lv));
  }
  if (!p.final_scale.empty()) {
    pv.final_scale = next();
    pv.final_offset = next();
  }
  pv.unembed = p.config.tie_embeddings ? pv.token : next();
  if (i != vars.size()) throw std::invalid_argument("forward: too many parameter variables");
  return pv;
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& m, std::size_t offset, std::size_t count) {
  Tensor<T> out = Tensor<T>::matrix(count, m.cols());
  std::copy_n(m.data() + offset * m.cols(), count * m.cols(), out.data());
  return out;
}

}  // namespace

template <typename T>
PackedForward<T> forward_packed(Tape<T>& tape, const ModelParameters<T>& params,
                                std::span<const std::span<const Token>> sequences,
                                const ForwardOptions<T>& options,
                                std::span<const Var> param_vars) {
  const ModelConfig& c = params.config;
  if (sequences.empty()) throw std::invalid_argument("forward: empty batch");
  PackedForward<T> result;
  std::vector<Token> ids;
  std::vector<Token> positions;
  for (const auto& seq : sequences) {
    if (seq.empty()) throw std::invalid_argument("forward: empty sequence");
    if (seq.size() > static_cast<std::size_t>(c.max_len)) {
      throw std::invalid_argument("forward: sequence of length " + std::to_string(seq.size()) +
                                  " exceeds max_len " + std::to_string(c.max_len));
    }
    result.segments.push_back({ids.size(), seq.size()});
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (seq[i] < 0 || seq[i] >= c.vocab_size) {
        throw std::invalid_argument("forward: token id " + std::to_string(seq[i]) +
                                    " outside vocabulary of " + std::to_string(c.vocab_size));
      }
      ids.push_back(seq[i]);
      positions.push_back(static_cast<Token>(i));
    }
  }
  for (const auto& hook : options.hooks) {
    if (hook.layer < 0 || hook.layer >= c.layers || hook.head < 0 || hook.head >= c.heads) {
      throw std::invalid_argument("forward: hook targets missing layer/head");
    }
  }

  const ParamVars pv = bind(tape, params, param_vars);
  const bool drop = options.dropout_rng != nullptr && c.dropout > 0.0;
  auto maybe_dropout = [&](Var x) {
    return drop ? ops::dropout(tape, x, c.dropout, *options.dropout_rng) : x;
  };

  if (options.capture) {
    for (std::size_t s = 0; s < sequences.size(); ++s) {
      AttentionTrace<T> tr;
      tr.layers = c.layers;
      tr.heads = c.heads;
      tr.entries.resize(static_cast<std::size_t>(c.layers * c.heads));
      result.traces.push_back(std::move(tr));
    }
  }

  Var x = ops::add(tape, ops::gather_rows(tape, pv.token, std::span<const Token>(ids)),
                   ops::gather_rows(tape, pv.position, std::span<const Token>(positions)));
  x = maybe_dropout(x);

  auto attention_block = [&](int l, Var h) {
    const LayerVars& lv = pv.layers[static_cast<std::size_t>(l)];
    Var sum{};
    for (int hd = 0; hd < c.heads; ++hd) {
      const HeadVars& hv = lv.heads[static_cast<std::size_t>(hd)];
      Var q = ops::matmul(tape, h, hv.wq);
      Var k = ops::matmul(tape, h, hv.wk);
      Var v = ops::matmul(tape, h, hv.wv);
      bool hard = false, zero = false, transformed = false;
      Tensor<T> qt, kt;
      for (const auto& hook : options.hooks) {
        if (hook.layer != l || hook.head != hd || hook.intervention == nullptr) continue;
        if (!transformed) {
          qt = tape.value(q);
          kt = tape.value(k);
          transformed = true;
        }
        hook.intervention->transform_queries(qt);
        hook.intervention->transform_keys(kt);
        hard = hard || hook.intervention->hard_attention();
        zero = zero || hook.intervention->zero_output();
      }
      if (transformed) {
        q = tape.constant(std::move(qt));
        k = tape.constant(std::move(kt));
      }
      std::vector<Tensor<T>> attn;
      Var z = causal_attention(tape, q, k, v, result.segments, hard,
                               options.capture ? &attn : nullptr);
      if (options.capture) {
        for (std::size_t s = 0; s < result.segments.size(); ++s) {
          const Segment& seg = result.segments[s];
          HeadTrace<T>& ht = result.traces[s].at(l, hd);
          ht.queries = slice_rows(tape.value(q), seg.offset, seg.length);
          ht.keys = slice_rows(tape.value(k), seg.offset, seg.length);
          ht.attention = std::move(attn[s]);
          ht.outputs = zero ? Tensor<T>::matrix(seg.length, tape.value(z).cols())
                            : slice_rows(tape.value(z), seg.offset, seg.length);
        }
      }
      if (zero) continue;
      Var contrib = ops::matmul(tape, z, hv.wo);
      sum = sum.valid() ? ops::add(tape, sum, contrib) : contrib;
    }
    if (!sum.valid()) {
      sum = tape.constant(Tensor<T>::matrix(ids.size(), static_cast<std::size_t>(c.model_dim)));
    }
    return maybe_dropout(sum);
  };
  auto mlp_block = [&](int l, Var h) {
    const LayerVars& lv = pv.layers[static_cast<std::size_t>(l)];
    Var hidden = ops::relu(tape, ops::matmul(tape, h, lv.w1));
    return maybe_dropout(ops::matmul(tape, hidden, lv.w2));
  };

  for (int l = 0; l < c.layers; ++l) {
    const LayerVars& lv = pv.layers[static_cast<std::size_t>(l)];
    switch (c.norm) {
      case NormPlacement::Pre:
        x = ops::add(tape, x,
                     attention_block(l, ops::layer_norm(tape, x, lv.ln1_scale, lv.ln1_offset)));
        x = ops::add(tape, x, mlp_block(l, ops::layer_norm(tape, x, lv.ln2_scale, lv.ln2_offset)));
        break;
      case NormPlacement::Post:
        x = ops::layer_norm(tape, ops::add(tape, x, attention_block(l, x)), lv.ln1_scale,
                            lv.ln1_offset);
        x = ops::layer_norm(tape, ops::add(tape, x, mlp_block(l, x)), lv.ln2_scale,
                            lv.ln2_offset);
        break;
      case NormPlacement::None:
        x = ops::add(tape, x, attention_block(l, x));
        x = ops::add(tape, x, mlp_block(l, x));
        break;
    }
  }
  if (c.norm == NormPlacement::Pre) x = ops::layer_norm(tape, x, pv.final_scale, pv.final_offset);
  result.logits = ops::matmul_nt(tape, x, pv.unembed);
  return result;
}

template <typename T>
ForwardResult<T> forward(const ModelParameters<T>& params, std::span<const Token> tokens,
                         const ForwardOptions<T>& options) {
  Tape<T> tape(false);
  const std::span<const Token> one[] = {tokens};
  PackedForward<T> packed = forward_packed(tape, params, std::span(one), options);
  ForwardResult<T> out;
  out.logits = tape.take(packed.logits);
  if (options.capture) out.trace = std::move(packed.traces.front());
  return out;
}

template <typename T>
Var sequence_loss(Tape<T>& tape, Var logits, std::span<const std::span<const Token>> batch,
                  std::span<const Segment> segments) {
  if (batch.empty()) throw std::invalid_argument("loss: empty batch");
  const std::size_t rows = tape.value(logits).rows();
  std::vector<std::int32_t> targets(rows, -1);
  std::vector<double> weights(rows, 0.0);
  const double per_seq = 1.0 / static_cast<double>(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& seq = batch[b];
    if (seq.size() < 2) throw std::invalid_argument("loss: sequences need at least two tokens");
    const double w = per_seq / static_cast<double>(seq.size() - 1);
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
      targets[segments[b].offset + i] = seq[i + 1];
      weights[segments[b].offset + i] = w;
    }
  }
  return ops::cross_entropy(tape, logits, std::span<const std::int32_t>(targets),
                            std::span<const double>(weights));
}

template <typename T>
double loss(const ModelParameters<T>& params, std::span<const std::span<const Token>> batch) {
  if (batch.empty()) throw std::invalid_argument("loss: empty batch");
  Tape<T> tape(false);
  PackedForward<T> packed = forward_packed(tape, params, batch, ForwardOptions<T>{});
  const Var l = sequence_loss(tape, packed.logits, batch, packed.segments);
  return static_cast<double>(tape.value(l)[0]);
}

#define PROXYLAB_TRANSFORMER_INSTANTIATE(T)                                                  \
  template PackedForward<T> forward_packed<T>(Tape<T>&, const ModelParameters<T>&,           \
                                              std::span<const std::span<const Token>>,       \
                                              const ForwardOptions<T>&, std::span<const Var>); \
  template ForwardResult<T> forward<T>(const ModelParameters<T>&, std::span<const Token>,    \
                                       const ForwardOptions<T>&);                            \
  template Var sequence_loss<T>(Tape<T>&, Var, std::span<const std::span<const Token>>,      \
                                std::span<const Segment>);                                   \
  template double loss<T>(const ModelParameters<T>&, std::span<const std::span<const Token>>);

PROXYLAB_TRANSFORMER_INSTANTIATE(float)
PROXYLAB_TRANSFORMER_INSTANTIATE(double)

#undef PROXYLAB_TRANSFORMER_INSTANTIATE

}  // namespace proxylab::model
