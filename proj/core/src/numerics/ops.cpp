#include "proxylab/numerics/ops.hpp"

#include <cmath>
#include <vector>

#include "proxylab/numerics/gemm.hpp"

namespace proxylab::ops {
namespace {

void require(bool cond, const char* op, const std::string& detail) {
  if (!cond) throw std::invalid_argument(std::string(op) + ": " + detail);
}

template <typename T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
  T* d = dst.data();
  const T* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

}  // namespace

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
  const auto& va = tape.value(a);
  const auto& vb = tape.value(b);
  require(va.size() == vb.size(), "add",
          shape_string(va.shape()) + " vs " + shape_string(vb.shape()));
  Tensor<T> out = va;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += vb[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape<T>& t, Var o) {
    const Tensor<T>& g = t.grad(o);
    if (t.requires_grad(a)) accumulate(t.grad(a), g);
    if (t.requires_grad(b)) accumulate(t.grad(b), g);
  });
}

template <typename T>
Var mul(Tape<T>& tape, Var a, Var b) {
  const auto& va = tape.value(a);
  const auto& vb = tape.value(b);
  require(va.size() == vb.size(), "mul",
          shape_string(va.shape()) + " vs " + shape_string(vb.shape()));
  Tensor<T> out = va;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape<T>& t, Var o) {
    const Tensor<T>& g = t.grad(o);
    const Tensor<T>& xa = t.value(a);
    const Tensor<T>& xb = t.value(b);
    if (t.requires_grad(a)) {
      Tensor<T>& ga = t.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * xb[i];
    }
    if (t.requires_grad(b)) {
      Tensor<T>& gb = t.grad(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * xa[i];
    }
  });
}

template <typename T>
Var scale(Tape<T>& tape, Var a, T factor) {
  Tensor<T> out = tape.value(a);
  for (T& v : out.values()) v *= factor;
  return tape.record(std::move(out), {a}, [a, factor](Tape<T>& t, Var o) {
    const Tensor<T>& g = t.grad(o);
    Tensor<T>& ga = t.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
  });
}

template <typename T>
Var add_row(Tape<T>& tape, Var x, Var bias) {
  const auto& vx = tape.value(x);
  const auto& vb = tape.value(bias);
  require(vb.size() == vx.cols(), "add_row",
          shape_string(vx.shape()) + " + " + shape_string(vb.shape()));
  Tensor<T> out = vx;
  const std::size_t n = vx.rows(), d = vx.cols();
  for (std::size_t r = 0; r < n; ++r) {
    T* row = out.data() + r * d;
    for (std::size_t c = 0; c < d; ++c) row[c] += vb[c];
  }
  return tape.record(std::move(out), {x, bias}, [x, bias, n, d](Tape<T>& t, Var o) {
    const Tensor<T>& g = t.grad(o);
    if (t.requires_grad(x)) accumulate(t.grad(x), g);
    if (t.requires_grad(bias)) {
      Tensor<T>& gb = t.grad(bias);
      for (std::size_t r = 0; r < n; ++r) {
        const T* row = g.data() + r * d;
        for (std::size_t c = 0; c < d; ++c) gb[c] += row[c];
      }
    }
  });
}

template <typename T>
Var matmul(Tape<T>& tape, Var a, Var b) {
  const auto& va = tape.value(a);
  const auto& vb = tape.value(b);
  const std::size_t m = va.rows(), k = va.cols(), n = vb.cols();
  require(vb.rows() == k, "matmul",
          shape_string(va.shape()) + " x " + shape_string(vb.shape()));
  Tensor<T> out = Tensor<T>::matrix(m, n);
  gemm::nn(m, n, k, va.data(), k, vb.data(), n, out.data(), n);
  return tape.record(std::move(out), {a, b}, [a, b, m, n, k](Tape<T>& t, Var o) {
    const Tensor<T>& g = t.grad(o);
    if (t.requires_grad(a)) {
      // dA = G · Bᵀ
      gemm::nt(m, k, n, g.data(), n, t.value(b).data(), n, t.grad(a).data(), k);
    }
    if (t.requires_grad(b)) {
      // dB = Aᵀ · G
      gemm::tn(k, n, m, t.value(a).data(), k, g.data(), n, t.grad(b).data(), n);
    }
  });
}

template <typename T>
Var matmul_nt(Tape<T>& tape, Var a, Var b) {
  const auto& va = tape.value(a);
  const auto& vb = tape.value(b);
  const std::size_t m = va.rows(), k = va.cols(), n = vb.rows();
  require(vb.cols() == k, "matmul_nt",
          shape_string(va.shape()) + " x " + shape_string(vb.shape()) + "^T");
  Tensor<T> out = Tensor<T>::matrix(m, n);
  gemm::nt(m, n, k, va.data(), k, vb.data(), k, out.data(), n);
  return tape.record(std::move(out), {a, b}, [a, b, m, n, k](Tape<T>& t, Var o) {
    const Tensor<T>& g = t.grad(o);
    if (t.requires_grad(a)) {
      // dA = G · B
      gemm::nn(m, k, n, g.data(), n, t.value(b).data(), k, t.grad(a).data(), k);
    }
    if (t.requires_grad(b)) {
      // dB = Gᵀ · A
      gemm::tn(n, k, m, g.data(), n, t.value(a).data(), k, t.grad(b).data(), k);
    }
  });
}

template <typename T>
Var relu(Tape<T>& tape, Var x) {
  Tensor<T> out = tape.value(x);
  for (T& v : out.values()) v = v > T{0} ? v : T{0};
  return tape.record(std::move(out), {x}, [x](Tape<T>& t, Var o) {
    const Tensor<T>& g = t.grad(o);
    const Tensor<T>& y = t.value(o);
    Tensor<T>& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (y[i] > T{0}) gx[i] += g[i];
    }
  });
}

template <typename T>
Var tanh(Tape<T>& tape, Var x) {
  Tensor<T> out = tape.value(x);
  for (T& v : out.values()) v = std::tanh(v);
  return tape.record(std::move(out), {x}, [x](Tape<T>& t, Var o) {
    const Tensor<T>& g = t.grad(o);
    const Tensor<T>& y = t.value(o);
    Tensor<T>& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (T{1} - y[i] * y[i]);
  });
}

template <typename T>
Var sum(Tape<T>& tape, Var x) {
  const auto& vx = tape.value(x);
  double acc = 0.0;
  for (T v : vx.values()) acc += v;
  Tensor<T> out({1}, static_cast<T>(acc));
  return tape.record(std::move(out), {x}, [x](Tape<T>& t, Var o) {
    const T g = t.grad(o)[0];
    for (T& v : t.grad(x).values()) v += g;
  });
}

template <typename T>
Var gather_rows(Tape<T>& tape, Var table, std::span<const std::int32_t> ids) {
  const auto& vt = tape.value(table);
  const std::size_t d = vt.cols();
  Tensor<T> out = Tensor<T>::matrix(ids.size(), d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && static_cast<std::size_t>(ids[i]) < vt.rows(), "gather_rows",
            "index " + std::to_string(ids[i]) + " outside table of " +
                std::to_string(vt.rows()) + " rows");
    std::copy_n(vt.data() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
  }
  std::vector<std::int32_t> idx(ids.begin(), ids.end());
  return tape.record(std::move(out), {table},
                     [table, d, idx = std::move(idx)](Tape<T>& t, Var o) {
                       const Tensor<T>& g = t.grad(o);
                       Tensor<T>& gt = t.grad(table);
                       for (std::size_t i = 0; i < idx.size(); ++i) {
                         gemm::axpy(d, T{1}, g.data() + i * d,
                                    gt.data() + static_cast<std::size_t>(idx[i]) * d);
                       }
                     });
}

template <typename T>
Var layer_norm(Tape<T>& tape, Var x, Var scale, Var offset, T eps) {
  const auto& vx = tape.value(x);
  const auto& vg = tape.value(scale);
  const auto& vb = tape.value(offset);
  const std::size_t n = vx.rows(), d = vx.cols();
  require(vg.size() == d && vb.size() == d, "layer_norm",
          "scale/offset must have " + std::to_string(d) + " entries");
  Tensor<T> out = Tensor<T>::matrix(n, d);
  // Normalized rows and inverse std are kept for the backward pass.
  Tensor<T> xhat = Tensor<T>::matrix(n, d);
  std::vector<T> rstd(n);
  for (std::size_t r = 0; r < n; ++r) {
    const T* xr = vx.data() + r * d;
    T mean{0};
    for (std::size_t c = 0; c < d; ++c) mean += xr[c];
    mean /= static_cast<T>(d);
    T var{0};
    for (std::size_t c = 0; c < d; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= static_cast<T>(d);
    const T inv = T{1} / std::sqrt(var + eps);
    rstd[r] = inv;
    T* hr = xhat.data() + r * d;
    T* yr = out.data() + r * d;
    for (std::size_t c = 0; c < d; ++c) {
      hr[c] = (xr[c] - mean) * inv;
      yr[c] = hr[c] * vg[c] + vb[c];
    }
  }
  if (!tape.recording()) return tape.constant(std::move(out));
  return tape.record(
      std::move(out), {x, scale, offset},
      [x, scale, offset, n, d, xhat = std::move(xhat), rstd = std::move(rstd)](Tape<T>& t,
                                                                             Var o) {
        const Tensor<T>& g = t.grad(o);
        const Tensor<T>& vg = t.value(scale);
        if (t.requires_grad(scale) || t.requires_grad(offset)) {
          Tensor<T>& gg = t.grad(scale);
          Tensor<T>& gb = t.grad(offset);
          for (std::size_t r = 0; r < n; ++r) {
            const T* gr = g.data() + r * d;
            const T* hr = xhat.data() + r * d;
            for (std::size_t c = 0; c < d; ++c) {
              gg[c] += gr[c] * hr[c];
              gb[c] += gr[c];
            }
          }
        }
        if (t.requires_grad(x)) {
          Tensor<T>& gx = t.grad(x);
          std::vector<T> dh(d);
          for (std::size_t r = 0; r < n; ++r) {
            const T* gr = g.data() + r * d;
            const T* hr = xhat.data() + r * d;
            T mean_dh{0}, mean_dh_h{0};
            for (std::size_t c = 0; c < d; ++c) {
              dh[c] = gr[c] * vg[c];
              mean_dh += dh[c];
              mean_dh_h += dh[c] * hr[c];
            }
            mean_dh /= static_cast<T>(d);
            mean_dh_h /= static_cast<T>(d);
            T* gxr = gx.data() + r * d;
            for (std::size_t c = 0; c < d; ++c) {
              gxr[c] += rstd[r] * (dh[c] - mean_dh - hr[c] * mean_dh_h);
            }
          }
        }
      });
}

template <typename T>
Var dropout(Tape<T>& tape, Var x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  require(rate < 1.0, "dropout", "rate must be < 1");
  const auto& vx = tape.value(x);
  Tensor<T> mask(vx.shape());
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  for (T& m : mask.values()) m = rng.uniform() < rate ? T{0} : keep_scale;
  Tensor<T> out = vx;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return tape.record(std::move(out), {x}, [x, mask = std::move(mask)](Tape<T>& t, Var o) {
    const Tensor<T>& g = t.grad(o);
    Tensor<T>& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
  });
}

template <typename T>
Var cross_entropy(Tape<T>& tape, Var logits, std::span<const std::int32_t> targets,
                  std::span<const double> weights) {
  const auto& vl = tape.value(logits);
  const std::size_t n = vl.rows(), v = vl.cols();
  require(targets.size() == n && weights.size() == n, "cross_entropy",
          "targets/weights must have one entry per row");
  // Softmax probabilities are cached for backward.
  Tensor<T> probs = Tensor<T>::matrix(n, v);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (targets[r] < 0) continue;
    require(static_cast<std::size_t>(targets[r]) < v, "cross_entropy",
            "target " + std::to_string(targets[r]) + " outside vocabulary");
    const T* lr = vl.data() + r * v;
    T* pr = probs.data() + r * v;
    T mx = lr[0];
    for (std::size_t c = 1; c < v; ++c) mx = std::max(mx, lr[c]);
    double z = 0.0;
    for (std::size_t c = 0; c < v; ++c) {
      pr[c] = std::exp(lr[c] - mx);
      z += pr[c];
    }
    const T inv = static_cast<T>(1.0 / z);
    for (std::size_t c = 0; c < v; ++c) pr[c] *= inv;
    const double logp = static_cast<double>(lr[targets[r]] - mx) - std::log(z);
    total -= weights[r] * logp;
  }
  Tensor<T> out({1}, static_cast<T>(total));
  std::vector<std::int32_t> tgt(targets.begin(), targets.end());
  std::vector<double> w(weights.begin(), weights.end());
  return tape.record(std::move(out), {logits},
                     [logits, n, v, probs = std::move(probs), tgt = std::move(tgt),
                      w = std::move(w)](Tape<T>& t, Var o) {
                       const T g = t.grad(o)[0];
                       Tensor<T>& gl = t.grad(logits);
                       for (std::size_t r = 0; r < n; ++r) {
                         if (tgt[r] < 0) continue;
                         const T scale = static_cast<T>(w[r]) * g;
                         const T* pr = probs.data() + r * v;
                         T* gr = gl.data() + r * v;
                         for (std::size_t c = 0; c < v; ++c) gr[c] += scale * pr[c];
                         gr[tgt[r]] -= scale;
                       }
                     });
}

#define PROXYLAB_OPS_INSTANTIATE(T)                                                 \
  template Var add<T>(Tape<T>&, Var, Var);                                          \
  template Var mul<T>(Tape<T>&, Var, Var);                                          \
  template Var scale<T>(Tape<T>&, Var, T);                                          \
  template Var add_row<T>(Tape<T>&, Var, Var);                                      \
  template Var matmul<T>(Tape<T>&, Var, Var);                                       \
  template Var matmul_nt<T>(Tape<T>&, Var, Var);                                    \
  template Var relu<T>(Tape<T>&, Var);                                              \
  template Var tanh<T>(Tape<T>&, Var);                                              \
  template Var sum<T>(Tape<T>&, Var);                                               \
  template Var gather_rows<T>(Tape<T>&, Var, std::span<const std::int32_t>);        \
  template Var layer_norm<T>(Tape<T>&, Var, Var, Var, T);                           \
  template Var dropout<T>(Tape<T>&, Var, double, Rng&);                             \
  template Var cross_entropy<T>(Tape<T>&, Var, std::span<const std::int32_t>,       \
                                std::span<const double>);

PROXYLAB_OPS_INSTANTIATE(float)
PROXYLAB_OPS_INSTANTIATE(double)

#undef PROXYLAB_OPS_INSTANTIATE

}  // namespace proxylab::ops
