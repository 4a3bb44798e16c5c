#pragma once

#include <cmath>
#include <optional>

#include "arena/core/ops.hpp"

namespace arena::attn {

struct AttentionOutput {
  Tensor output;                   // N x d
  std::optional<Tensor> weights;   // N x N, exact mechanisms only
};

namespace detail {
inline void check_qkv(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2)
    throw ShapeError("attention: Q/K/V must be rank-2");
  if (q.cols() != k.cols() || k.rows() != v.rows())
    throw ShapeError("attention: incompatible Q " + shape_str(q.shape()) + " K " +
                     shape_str(k.shape()) + " V " + shape_str(v.shape()));
}

inline void accum(Tensor& dst, const Tensor& src) {
  for (std::int64_t i = 0; i < dst.numel(); ++i) dst.data()[i] += src.data()[i];
}

// Key-side padding mask broadcast over all query rows. valid < 0 means all.
inline std::optional<Tensor> key_mask(std::int64_t rows, std::int64_t cols, std::int64_t valid) {
  if (valid < 0 || valid >= cols) return std::nullopt;
  Tensor m = Tensor::zeros({rows, cols});
  for (std::int64_t i = 0; i < rows; ++i)
    for (std::int64_t j = 0; j < valid; ++j) m.at(i, j) = 1.0f;
  return m;
}
}  // namespace detail

// softmax(Q K^T / sqrt(d)) V over all pairs; weights populated.
// valid_len masks out padded key positions (suffix padding).
inline AttentionOutput full_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                      std::int64_t valid_len = -1) {
  detail::check_qkv(q, k, v);
  float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(q.cols()));
  Tensor logits = scale(matmul(q, transpose(k)), inv_sqrt_d);
  Tensor w = softmax_rows(logits, detail::key_mask(q.rows(), k.rows(), valid_len));
  return {matmul(w, v), w};
}

}  // namespace arena::attn
