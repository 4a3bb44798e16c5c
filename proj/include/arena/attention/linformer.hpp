#pragma once

#include <cmath>

#include "arena/attention/full.hpp"
#include "arena/core/ops.hpp"

namespace arena::attn {

// Query-chunk size for the streaming low-rank and kernel mechanisms. Fixed so
// working memory is constant in N.
inline constexpr std::int64_t kStreamChunk = 1024;

// Low-rank attention: out = softmax(Q (EK)^T / sqrt(d)) (FV) with E, F k x N
// projections of keys and values. Processes queries in fixed-size chunks and
// recomputes the chunk softmax in the backward pass, so the only N-sized
// buffer retained is the output. Weights are not exposed.
inline AttentionOutput linformer_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                           const Tensor& e, const Tensor& f) {
  detail::check_qkv(q, k, v);
  if (e.rank() != 2 || f.rank() != 2 || e.cols() != k.rows() || f.cols() != v.rows() ||
      e.rows() != f.rows())
    throw ShapeError("linformer_attention: projections E " + shape_str(e.shape()) + " F " +
                     shape_str(f.shape()) + " vs keys " + shape_str(k.shape()));
  if (e.rows() < 1) throw ParamError("linformer_attention: rank k must be >= 1");

  const std::int64_t n = q.rows(), d = q.cols(), dv = v.cols();
  const float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(d));

  Tensor out, ek, fv;
  {
    NoGradGuard ng;
    ek = matmul(e, k);  // k x d key summaries
    fv = matmul(f, v);
    out = Tensor::zeros({n, dv});
    Tensor ekt = transpose(ek);
    for (std::int64_t r0 = 0; r0 < n; r0 += kStreamChunk) {
      std::int64_t r1 = std::min(n, r0 + kStreamChunk);
      Tensor qc = slice_rows(q, r0, r1);
      Tensor w = softmax_rows(scale(matmul(qc, ekt), inv_sqrt_d));
      Tensor oc = matmul(w, fv);
      std::copy(oc.data(), oc.data() + oc.numel(), out.data() + r0 * dv);
    }
  }

  auto vjp = [q, k, v, e, f, ek, fv, inv_sqrt_d, n, d](const Tensor& g) {
    NoGradGuard ng;
    Tensor d_ek = Tensor::zeros(ek.shape());
    Tensor d_fv = Tensor::zeros(fv.shape());
    Tensor dq = Tensor::zeros(q.shape());
    Tensor ekt = transpose(ek);
    Tensor fvt = transpose(fv);
    for (std::int64_t r0 = 0; r0 < n; r0 += kStreamChunk) {
      std::int64_t r1 = std::min(n, r0 + kStreamChunk);
      Tensor qc = slice_rows(q, r0, r1);
      Tensor gc = slice_rows(g, r0, r1);
      Tensor w = softmax_rows(scale(matmul(qc, ekt), inv_sqrt_d));  // recomputed
      Tensor dw = matmul(gc, fvt);
      // softmax backward: dl = w * (dw - rowsum(dw * w))
      Tensor dots = row_sum(mul(dw, w));
      Tensor dl = mul(w, sub_colvec(dw, dots));
      Tensor dqc = scale(matmul(dl, ek), inv_sqrt_d);
      std::copy(dqc.data(), dqc.data() + dqc.numel(), dq.data() + r0 * d);
      detail::accum(d_ek, scale(matmul(transpose(dl), qc), inv_sqrt_d));
      detail::accum(d_fv, matmul(transpose(w), gc));
    }
    Tensor de = matmul(d_ek, transpose(k));
    Tensor dk = matmul(transpose(e), d_ek);
    Tensor df = matmul(d_fv, transpose(v));
    Tensor dv = matmul(transpose(f), d_fv);
    return std::vector<Tensor>{dq, dk, dv, de, df};
  };
  return {record(std::move(out), {q, k, v, e, f}, std::move(vjp)), std::nullopt};
}

}  // namespace arena::attn
