#include "proxylab/model/attention.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "proxylab/numerics/gemm.hpp"

namespace proxylab::model {

template <typename T>
Var causal_attention(Tape<T>& tape, Var q, Var k, Var v, std::span<const Segment> segments,
                     bool hard, std::vector<Tensor<T>>* attention_out) {
  const Tensor<T>& vq = tape.value(q);
  const Tensor<T>& vk = tape.value(k);
  const Tensor<T>& vv = tape.value(v);
  const std::size_t rows = vq.rows(), dh = vq.cols();
  if (vk.rows() != rows || vv.rows() != rows || vk.cols() != dh) {
    throw std::invalid_argument("causal_attention: q/k/v shapes disagree");
  }
  const std::size_t dv = vv.cols();
  const T inv_scale = T{1} / std::sqrt(static_cast<T>(dh));

  // Attention rows are stored packed: row i of a segment keeps i+1 weights.
  std::vector<std::size_t> row_start(rows + 1, 0);
  for (const Segment& s : segments) {
    if (s.offset + s.length > rows) throw std::invalid_argument("causal_attention: bad segment");
    for (std::size_t i = 0; i < s.length; ++i) row_start[s.offset + i + 1] = i + 1;
  }
  for (std::size_t r = 0; r < rows; ++r) row_start[r + 1] += row_start[r];
  std::vector<T> weights(row_start[rows]);

  Tensor<T> out = Tensor<T>::matrix(rows, dv);
  if (attention_out) attention_out->clear();
  std::vector<T> kt;
  for (const Segment& s : segments) {
    // Keys transposed (d_h × n) so each score row is a run of axpys over j.
    kt.assign(dh * s.length, T{0});
    for (std::size_t j = 0; j < s.length; ++j) {
      const T* kj = vk.data() + (s.offset + j) * dh;
      for (std::size_t c = 0; c < dh; ++c) kt[c * s.length + j] = kj[c];
    }
    for (std::size_t i = 0; i < s.length; ++i) {
      const std::size_t r = s.offset + i;
      T* a = weights.data() + row_start[r];
      const T* qi = vq.data() + r * dh;
      std::fill(a, a + i + 1, T{0});
      for (std::size_t c = 0; c < dh; ++c) {
        gemm::axpy(i + 1, qi[c] * inv_scale, kt.data() + c * s.length, a);
      }
      T mx = a[0];
      std::size_t best = 0;
      for (std::size_t j = 1; j <= i; ++j) {
        if (a[j] >= mx) {
          mx = a[j];
          best = j;
        }
      }
      if (hard) {
        std::fill(a, a + i + 1, T{0});
        a[best] = T{1};
      } else {
        T z{0};
        for (std::size_t j = 0; j <= i; ++j) {
          a[j] = std::exp(a[j] - mx);
          z += a[j];
        }
        const T inv = T{1} / z;
        for (std::size_t j = 0; j <= i; ++j) a[j] *= inv;
      }
      T* o = out.data() + r * dv;
      for (std::size_t j = 0; j <= i; ++j) {
        if (a[j] != T{0}) gemm::axpy(dv, a[j], vv.data() + (s.offset + j) * dv, o);
      }
    }
    if (attention_out) {
      Tensor<T> full = Tensor<T>::matrix(s.length, s.length);
      for (std::size_t i = 0; i < s.length; ++i) {
        const T* a = weights.data() + row_start[s.offset + i];
        std::copy(a, a + i + 1, full.data() + i * s.length);
      }
      attention_out->push_back(std::move(full));
    }
  }

  std::vector<Segment> segs(segments.begin(), segments.end());
  return tape.record(
      std::move(out), {q, k, v},
      [q, k, v, hard, dh, dv, inv_scale, segs = std::move(segs),
       row_start = std::move(row_start), weights = std::move(weights)](Tape<T>& t, Var o) {
        const Tensor<T>& g = t.grad(o);
        const Tensor<T>& vq = t.value(q);
        const Tensor<T>& vk = t.value(k);
        const Tensor<T>& vv = t.value(v);
        const bool need_q = t.requires_grad(q) && !hard;
        const bool need_k = t.requires_grad(k) && !hard;
        const bool need_v = t.requires_grad(v);
        T* gq = need_q ? t.grad(q).data() : nullptr;
        T* gk = need_k ? t.grad(k).data() : nullptr;
        T* gv = need_v ? t.grad(v).data() : nullptr;
        std::vector<T> ds, vt;
        for (const Segment& s : segs) {
          if (need_q || need_k) {
            vt.assign(dv * s.length, T{0});
            for (std::size_t j = 0; j < s.length; ++j) {
              const T* vj = vv.data() + (s.offset + j) * dv;
              for (std::size_t c = 0; c < dv; ++c) vt[c * s.length + j] = vj[c];
            }
          }
          for (std::size_t i = 0; i < s.length; ++i) {
            const std::size_t r = s.offset + i;
            const T* a = weights.data() + row_start[r];
            const T* gi = g.data() + r * dv;
            if (need_v) {
              for (std::size_t j = 0; j <= i; ++j) {
                if (a[j] != T{0}) gemm::axpy(dv, a[j], gi, gv + (s.offset + j) * dv);
              }
            }
            if (!need_q && !need_k) continue;
            // dA_ij = g_i · v_j ; dS_ij = A_ij (dA_ij - sum_l A_il dA_il)
            ds.assign(i + 1, T{0});
            for (std::size_t c = 0; c < dv; ++c) {
              gemm::axpy(i + 1, gi[c], vt.data() + c * s.length, ds.data());
            }
            T dot_sum{0};
            for (std::size_t j = 0; j <= i; ++j) dot_sum += a[j] * ds[j];
            for (std::size_t j = 0; j <= i; ++j) ds[j] = a[j] * (ds[j] - dot_sum) * inv_scale;
            const T* qi = vq.data() + r * dh;
            for (std::size_t j = 0; j <= i; ++j) {
              if (ds[j] == T{0}) continue;
              if (need_q) gemm::axpy(dh, ds[j], vk.data() + (s.offset + j) * dh, gq + r * dh);
              if (need_k) gemm::axpy(dh, ds[j], qi, gk + (s.offset + j) * dh);
            }
          }
        }
      });
}

template Var causal_attention<float>(Tape<float>&, Var, Var, Var, std::span<const Segment>, bool,
                                     std::vector<Tensor<float>>*);
template Var causal_attention<double>(Tape<double>&, Var, Var, Var, std::span<const Segment>,
                                      bool, std::vector<Tensor<double>>*);

}  // namespace proxylab::model
