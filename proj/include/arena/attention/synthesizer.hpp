#pragma once

#include <cmath>

#include "arena/attention/full.hpp"

namespace arena::attn {

// Dense synthesizer: per-token logits relu(X W1) W2, no query-key interaction.
// W2 fixes the maximum sequence length; longer inputs are an error.
inline AttentionOutput synthesizer_dense_attention(const Tensor& x, const Tensor& v,
                                                   const Tensor& w1, const Tensor& w2,
                                                   std::int64_t valid_len = -1) {
  if (x.rank() != 2 || v.rank() != 2 || x.rows() != v.rows())
    throw ShapeError("synthesizer_dense_attention: X " + shape_str(x.shape()) + " vs V " +
                     shape_str(v.shape()));
  if (w1.rows() != x.cols() || w2.rows() != w1.cols())
    throw ShapeError("synthesizer_dense_attention: W1 " + shape_str(w1.shape()) + " W2 " +
                     shape_str(w2.shape()) + " incompatible with X " + shape_str(x.shape()));
  const std::int64_t n = x.rows();
  if (n > w2.cols())
    throw ShapeError("synthesizer_dense_attention: sequence length " + std::to_string(n) +
                     " exceeds synthesized width " + std::to_string(w2.cols()) +
                     " (fixed-length mechanism)");
  Tensor logits = matmul(relu(matmul(x, w1)), w2);
  if (n < w2.cols()) logits = slice_cols(logits, 0, n);
  Tensor w = softmax_rows(logits, detail::key_mask(n, n, valid_len));
  return {matmul(w, v), w};
}

// Random synthesizer: a learned (or fixed) logit matrix R shared by every
// input, sliced to the current length. R fixes the maximum sequence length.
inline AttentionOutput synthesizer_random_attention(const Tensor& v, const Tensor& r,
                                                    std::int64_t valid_len = -1) {
  if (v.rank() != 2 || r.rank() != 2 || r.rows() != r.cols())
    throw ShapeError("synthesizer_random_attention: R must be square, got " +
                     shape_str(r.shape()));
  const std::int64_t n = v.rows();
  if (n > r.rows())
    throw ShapeError("synthesizer_random_attention: sequence length " + std::to_string(n) +
                     " exceeds synthesized width " + std::to_string(r.rows()) +
                     " (fixed-length mechanism)");
  Tensor logits = n == r.rows() ? r : slice_cols(slice_rows(r, 0, n), 0, n);
  Tensor w = softmax_rows(logits, detail::key_mask(n, n, valid_len));
  return {matmul(w, v), w};
}

}  // namespace arena::attn
