#pragma once

#include <cmath>
#include <vector>

#include "arena/attention/full.hpp"

namespace arena::attn {

// Iterative row/column normalization in log space. Returns exp(M), which
// approaches a doubly stochastic matrix as iters grows. Differentiable.
inline Tensor sinkhorn_normalize(const Tensor& scores, std::int64_t iters) {
  if (scores.rank() != 2 || scores.rows() != scores.cols())
    throw ShapeError("sinkhorn_normalize: scores must be square, got " +
                     shape_str(scores.shape()));
  if (iters < 1) throw ParamError("sinkhorn_normalize: iters must be >= 1");
  Tensor m = scores;
  for (std::int64_t t = 0; t < iters; ++t) {
    m = sub_colvec(m, row_logsumexp(m));                                   // rows sum to 1
    m = transpose(sub_colvec(transpose(m), row_logsumexp(transpose(m))));  // cols sum to 1
  }
  return exp_t(m);
}

// Block attention with learned block mixing. Sequences are cut into
// non-overlapping blocks; block mean-pool similarities are Sinkhorn-normalized
// into a mixing matrix P, and each query block attends over its own block plus
// the P-mixed keys/values of all blocks.
inline AttentionOutput sinkhorn_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                          std::int64_t block_size, std::int64_t iters) {
  detail::check_qkv(q, k, v);
  if (block_size < 1) throw ParamError("sinkhorn_attention: block_size must be >= 1");
  if (iters < 1) throw ParamError("sinkhorn_attention: iters must be >= 1");
  if (q.rows() != k.rows())
    throw ShapeError("sinkhorn_attention: Q and K must have equal length, got " +
                     shape_str(q.shape()) + " vs " + shape_str(k.shape()));

  const std::int64_t n = q.rows(), d = q.cols(), dv = v.cols();
  const std::int64_t bs = std::min(block_size, n);
  const std::int64_t nb = (n + bs - 1) / bs;
  const std::int64_t n_pad = nb * bs;
  const float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(d));

  Tensor qp = n_pad == n ? q : pad_rows(q, n_pad);
  Tensor kp = n_pad == n ? k : pad_rows(k, n_pad);
  Tensor vp = n_pad == n ? v : pad_rows(v, n_pad);

  // Mean pool over the real rows of each block (constant matrix).
  Tensor pool;
  {
    NoGradGuard ng;
    pool = Tensor::zeros({nb, n_pad});
    for (std::int64_t b = 0; b < nb; ++b) {
      std::int64_t cnt = std::min(n, (b + 1) * bs) - b * bs;
      for (std::int64_t i = b * bs; i < b * bs + cnt; ++i)
        pool.at(b, i) = 1.0f / static_cast<float>(cnt);
    }
  }
  Tensor qb = matmul(pool, qp), kb = matmul(pool, kp);
  Tensor p = sinkhorn_normalize(scale(matmul(qb, transpose(kb)), inv_sqrt_d), iters);

  // Mix whole blocks: reshape so each row holds one block, then apply P.
  Tensor kmix = reshape(matmul(p, reshape(kp, {nb, bs * d})), {n_pad, d});
  Tensor vmix = reshape(matmul(p, reshape(vp, {nb, bs * dv})), {n_pad, dv});

  std::vector<Tensor> outs;
  for (std::int64_t b = 0; b < nb; ++b) {
    std::int64_t q0 = b * bs, q1 = std::min(n, q0 + bs);
    if (q0 >= n) break;
    Tensor qc = slice_rows(qp, q0, q1);
    Tensor keys = concat_rows({slice_rows(kp, q0, q0 + bs), slice_rows(kmix, q0, q0 + bs)});
    Tensor vals = concat_rows({slice_rows(vp, q0, q0 + bs), slice_rows(vmix, q0, q0 + bs)});
    Tensor mask;
    {
      NoGradGuard ng;
      mask = Tensor::zeros({q1 - q0, 2 * bs});
      for (std::int64_t i = 0; i < q1 - q0; ++i)
        for (std::int64_t j = 0; j < 2 * bs; ++j)
          mask.at(i, j) = (j < bs && q0 + j >= n) ? 0.0f : 1.0f;  // pad keys in own block
    }
    Tensor w = softmax_rows(scale(matmul(qc, transpose(keys)), inv_sqrt_d), mask);
    outs.push_back(matmul(w, vals));
  }
  return {concat_rows(outs), std::nullopt};
}

}  // namespace arena::attn
