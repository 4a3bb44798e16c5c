#pragma once

#include <cstdint>
#include <vector>

#include "arena/attention/full.hpp"
#include "arena/attention/spec.hpp"
#include "arena/core/rng.hpp"

namespace arena::attn {

// Boolean N x N mask of allowed (query, key) pairs. Diagonal always allowed,
// every row nonempty.
struct SparsityPattern {
  std::int64_t n = 0;
  std::vector<std::uint8_t> allowed;  // row-major n*n

  bool at(std::int64_t i, std::int64_t j) const {
    return allowed[static_cast<std::size_t>(i * n + j)] != 0;
  }
  void set(std::int64_t i, std::int64_t j) {
    allowed[static_cast<std::size_t>(i * n + j)] = 1;
  }
};

struct PatternParams {
  int window = 8;
  int stride = 4;
  int global_tokens = 1;
  int random_per_row = 2;
};

// Builds the mask families the paper emulates: local band, the
// Sparse-Transformer strided/fixed two-head unions, Longformer window+global,
// and BigBird window+global+seeded-random.
inline SparsityPattern build_sparsity_pattern(PatternKind kind, const PatternParams& p,
                                              std::int64_t n, Rng* rng = nullptr) {
  if (n < 1) throw ParamError("sparsity pattern: N must be >= 1, got " + std::to_string(n));
  if (p.window < 1) throw ParamError("sparsity pattern: window must be >= 1");
  if ((kind == PatternKind::strided || kind == PatternKind::fixed) && p.stride < 1)
    throw ParamError("sparsity pattern: stride must be >= 1");
  if ((kind == PatternKind::longformer || kind == PatternKind::bigbird) && p.global_tokens < 1)
    throw ParamError("sparsity pattern: global_tokens must be >= 1");

  SparsityPattern out;
  out.n = n;
  out.allowed.assign(static_cast<std::size_t>(n * n), 0);

  auto band = [&](std::int64_t w) {
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = std::max<std::int64_t>(0, i - w); j <= std::min(n - 1, i + w); ++j)
        out.set(i, j);
  };

  switch (kind) {
    case PatternKind::local:
      band(p.window);
      break;
    case PatternKind::strided:
      // Band head union stride head: j with (i - j) % stride == 0.
      band(p.window);
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < n; ++j)
          if ((i - j) % p.stride == 0) out.set(i, j);
      break;
    case PatternKind::fixed:
      // Band within stride cells union fixed summary columns at cell ends.
      for (std::int64_t i = 0; i < n; ++i) {
        std::int64_t cell = i / p.stride;
        for (std::int64_t j = cell * p.stride; j < std::min<std::int64_t>(n, (cell + 1) * p.stride); ++j)
          out.set(i, j);
      }
      for (std::int64_t j = p.stride - 1; j < n; j += p.stride)
        for (std::int64_t i = 0; i < n; ++i) out.set(i, j);
      break;
    case PatternKind::longformer:
      band(p.window);
      for (std::int64_t g = 0; g < std::min<std::int64_t>(p.global_tokens, n); ++g)
        for (std::int64_t i = 0; i < n; ++i) {
          out.set(g, i);  // global row
          out.set(i, g);  // global column
        }
      break;
    case PatternKind::bigbird: {
      if (!rng) throw ParamError("sparsity pattern: bigbird requires a seeded rng");
      band(p.window);
      for (std::int64_t g = 0; g < std::min<std::int64_t>(p.global_tokens, n); ++g)
        for (std::int64_t i = 0; i < n; ++i) {
          out.set(g, i);
          out.set(i, g);
        }
      for (std::int64_t i = 0; i < n; ++i)
        for (int r = 0; r < p.random_per_row; ++r)
          out.set(i, static_cast<std::int64_t>(rng->uniform_int(static_cast<std::uint64_t>(n))));
      break;
    }
  }
  for (std::int64_t i = 0; i < n; ++i) out.set(i, i);  // diagonal forced on
  return out;
}

// Full attention with logits at disallowed entries masked out before softmax.
inline AttentionOutput pattern_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                         const SparsityPattern& pattern,
                                         std::int64_t valid_len = -1) {
  detail::check_qkv(q, k, v);
  if (pattern.n != q.rows() || k.rows() != pattern.n)
    throw ShapeError("pattern_attention: pattern N " + std::to_string(pattern.n) +
                     " vs sequence " + std::to_string(q.rows()));
  std::int64_t n = pattern.n;
  Tensor mask = Tensor::zeros({n, n});
  std::int64_t valid = valid_len < 0 ? n : valid_len;
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < std::min(n, valid); ++j)
      if (pattern.at(i, j)) mask.at(i, j) = 1.0f;
  float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(q.cols()));
  Tensor logits = scale(matmul(q, transpose(k)), inv_sqrt_d);
  Tensor w = softmax_rows(logits, mask);
  return {matmul(w, v), w};
}

}  // namespace arena::attn
