#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "arena/attention/full.hpp"
#include "arena/core/rng.hpp"

namespace arena::attn {

// Random-rotation hash: project onto n_buckets/2 random directions and take
// argmax over [s, -s]. Identical rows always land in the same bucket.
inline std::vector<std::int64_t> lsh_bucket_ids(const Tensor& x, std::int64_t n_buckets,
                                                Rng& rng) {
  if (n_buckets < 2 || n_buckets % 2 != 0)
    throw ParamError("lsh_bucket_ids: n_buckets must be even and >= 2");
  const std::int64_t n = x.rows(), d = x.cols(), half = n_buckets / 2;
  Tensor proj = Tensor::randn({d, half}, rng);
  std::vector<std::int64_t> ids(n);
  for (std::int64_t i = 0; i < n; ++i) {
    float best = -std::numeric_limits<float>::infinity();
    std::int64_t arg = 0;
    for (std::int64_t j = 0; j < half; ++j) {
      double s = 0;
      for (std::int64_t c = 0; c < d; ++c) s += static_cast<double>(x.at(i, c)) * proj.at(c, j);
      if (s > best) { best = static_cast<float>(s); arg = j; }
      if (-s > best) { best = static_cast<float>(-s); arg = half + j; }
    }
    ids[i] = arg;
  }
  return ids;
}

// Bucketed attention with tied queries/keys. Per round: hash tokens, stable
// sort by bucket, attend within each chunk of `bucket_size` plus the previous
// chunk, and exclude self-matches unless a row has no other candidate. Rounds
// are combined by softmax over each row's log normalizer. capture_weights
// materializes the effective N x N weights (tests only; O(N^2)).
inline AttentionOutput lsh_attention(const Tensor& qk, const Tensor& v, std::int64_t rounds,
                                     std::int64_t bucket_size, Rng& rng,
                                     bool exclude_self = true, bool capture_weights = false) {
  detail::check_qkv(qk, qk, v);
  if (rounds < 1) throw ParamError("lsh_attention: rounds must be >= 1");
  if (bucket_size < 1) throw ParamError("lsh_attention: bucket_size must be >= 1");

  const std::int64_t n = qk.rows(), dv = v.cols();
  const std::int64_t b = std::min(bucket_size, n);
  const std::int64_t n_chunks = (n + b - 1) / b;
  const std::int64_t n_pad = n_chunks * b;
  const std::int64_t n_buckets = 2 * ((n_chunks + 1) / 2 + (n_chunks == 1 ? 1 : 0));
  const float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(qk.cols()));

  std::vector<Tensor> round_outs;    // each [n, dv], in original order
  std::vector<Tensor> round_logz;    // each [n, 1]
  Tensor eff_w = capture_weights ? Tensor::zeros({n, n}) : Tensor();
  std::vector<Tensor> round_eff;

  for (std::int64_t r = 0; r < rounds; ++r) {
    std::vector<std::int64_t> bucket = lsh_bucket_ids(qk.detached(), n_buckets, rng);
    // Sorted order: real tokens by (bucket, position); padding slots last.
    std::vector<std::int64_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::int64_t a, std::int64_t c) { return bucket[a] < bucket[c]; });
    std::vector<std::int64_t> sorted_full(n_pad, 0);  // pad slots reuse row 0, masked off
    std::copy(order.begin(), order.end(), sorted_full.begin());
    std::vector<std::int64_t> inv(n);
    for (std::int64_t i = 0; i < n; ++i) inv[order[i]] = i;

    Tensor qs = gather_rows(qk, sorted_full);
    Tensor vs = gather_rows(v, sorted_full);

    std::vector<Tensor> chunk_out, chunk_z;
    for (std::int64_t c = 0; c < n_chunks; ++c) {
      std::int64_t k0 = std::max<std::int64_t>(0, (c - 1) * b), k1 = (c + 1) * b;
      Tensor qc = slice_rows(qs, c * b, k1);
      Tensor kc = slice_rows(qs, k0, k1);
      Tensor vc = slice_rows(vs, k0, k1);
      std::int64_t nq = k1 - c * b, nk = k1 - k0;
      Tensor mask = Tensor::zeros({nq, nk});
      for (std::int64_t i = 0; i < nq; ++i) {
        std::int64_t gi = c * b + i;
        if (gi >= n) { mask.at(i, 0) = 1.0f; continue; }  // pad query: keep row valid
        std::int64_t allowed = 0;
        for (std::int64_t j = 0; j < nk; ++j) {
          std::int64_t gj = k0 + j;
          bool ok = gj < n && !(exclude_self && gj == gi);
          mask.at(i, j) = ok ? 1.0f : 0.0f;
          allowed += ok;
        }
        if (allowed == 0) mask.at(i, gi - k0) = 1.0f;  // sole candidate is itself
      }
      Tensor logits = scale(matmul(qc, transpose(kc)), inv_sqrt_d);
      // Log normalizer over the allowed set, for mixing across rounds.
      // Differentiable: disallowed entries pushed to -1e9 instead of hard-masked.
      Tensor offset;
      {
        NoGradGuard ng;
        offset = scale(add_scalar(mask, -1.0f), 1e9f);
      }
      Tensor zc = row_logsumexp(add(logits, offset));
      Tensor w = softmax_rows(logits, mask);
      chunk_out.push_back(matmul(w, vc));
      chunk_z.push_back(zc);
    }
    Tensor out_sorted = concat_rows(chunk_out);
    Tensor z_sorted = concat_rows(chunk_z);
    round_outs.push_back(gather_rows(out_sorted, inv));
    round_logz.push_back(gather_rows(z_sorted, inv));
    if (capture_weights) {
      NoGradGuard ng;
      Tensor wr = Tensor::zeros({n, n});
      // Rebuild per-row weights from logits for the effective matrix.
      for (std::int64_t c = 0; c < n_chunks; ++c) {
        std::int64_t k0 = std::max<std::int64_t>(0, (c - 1) * b), k1 = (c + 1) * b;
        for (std::int64_t i = c * b; i < k1 && i < n_pad; ++i) {
          std::int64_t oi = sorted_full[i];
          if (i >= n) continue;
          double denom = 0;
          std::vector<double> e(k1 - k0, 0.0);
          std::int64_t self_j = -1, allowed = 0;
          for (std::int64_t j = k0; j < k1; ++j) {
            std::int64_t oj = sorted_full[j];
            bool ok = j < n && !(exclude_self && j == i);
            if (j == i) self_j = j - k0;
            if (!ok) continue;
            ++allowed;
            double s = 0;
            for (std::int64_t cc = 0; cc < qk.cols(); ++cc)
              s += static_cast<double>(qk.at(oi, cc)) * qk.at(sorted_full[j], cc);
            e[j - k0] = std::exp(s * inv_sqrt_d);
            denom += e[j - k0];
          }
          if (allowed == 0 && self_j >= 0) {
            double s = 0;
            for (std::int64_t cc = 0; cc < qk.cols(); ++cc)
              s += static_cast<double>(qk.at(oi, cc)) * qk.at(oi, cc);
            e[self_j] = std::exp(s * inv_sqrt_d);
            denom = e[self_j];
          }
          for (std::int64_t j = k0; j < k1; ++j)
            if (j < n && e[j - k0] > 0)
              wr.at(oi, sorted_full[j]) += static_cast<float>(e[j - k0] / denom);
        }
      }
      round_eff.push_back(wr);
    }
  }

  Tensor out;
  if (rounds == 1) {
    out = round_outs[0];
    if (capture_weights) eff_w = round_eff[0];
  } else {
    Tensor zcat = concat_cols(round_logz);           // n x rounds
    Tensor rw = softmax_rows(zcat);                  // mixing weights per row
    out = Tensor();
    for (std::int64_t r = 0; r < rounds; ++r) {
      Tensor term = mul_colvec(round_outs[r], slice_cols(rw, r, r + 1));
      out = out.defined() ? add(out, term) : term;
    }
    if (capture_weights) {
      NoGradGuard ng;
      for (std::int64_t r = 0; r < rounds; ++r)
        for (std::int64_t i = 0; i < n; ++i)
          for (std::int64_t j = 0; j < n; ++j)
            eff_w.at(i, j) += rw.at(i, r) * round_eff[r].at(i, j);
    }
  }
  AttentionOutput res{out, std::nullopt};
  if (capture_weights) res.weights = eff_w;
  return res;
}

}  // namespace arena::attn
