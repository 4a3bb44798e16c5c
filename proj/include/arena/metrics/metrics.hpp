#pragma once

// Analysis metrics: attention-weighted mean query-to-key distance ("span"),
// classification accuracy, and elementwise approximation error between a
// mechanism's output and the exact softmax-attention output.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "arena/core/error.hpp"
#include "arena/core/tensor.hpp"
#include "arena/model/encoder.hpp"
#include "arena/model/train.hpp"

namespace arena::metrics {

// span = (1/N) sum_i sum_j w[i,j] * |i - j|, accumulated in 64-bit.
// Requires a square row-stochastic matrix: each row must sum to 1 within
// 1e-5 with nonnegative entries.
inline double attention_span(const Tensor& w) {
  if (w.rank() != 2 || w.rows() != w.cols())
    throw ShapeError("attention_span: square matrix required, got " + shape_str(w.shape()));
  std::int64_t n = w.rows();
  double total = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    double row_sum = 0.0, row_span = 0.0;
    for (std::int64_t j = 0; j < n; ++j) {
      double v = w.at(i, j);
      if (v < -1e-7)
        throw ParamError("attention_span: negative weight at (" + std::to_string(i) + "," +
                         std::to_string(j) + ")");
      row_sum += v;
      row_span += v * static_cast<double>(std::llabs(i - j));
    }
    if (std::abs(row_sum - 1.0) > 1e-5)
      throw ParamError("attention_span: row " + std::to_string(i) + " sums to " +
                       std::to_string(row_sum) + ", not 1");
    total += row_span;
  }
  return total / static_cast<double>(n);
}

// Closed form for a uniform N x N attention matrix: (N^2 - 1) / (3N).
inline double uniform_span(std::int64_t n) {
  return (static_cast<double>(n) * n - 1.0) / (3.0 * n);
}

struct SpanReport {
  // per_head[layer][head]: mean span over samples, token-distance units.
  std::vector<std::vector<double>> per_head;
  double aggregate = 0.0;  // unweighted mean of per_head values
  int samples = 0;
  bool cls_excluded = false;
  bool distance_normalized = false;  // |i-j| left in token units
};

inline void to_json(nlohmann::json& j, const SpanReport& r) {
  j = {{"per_head", r.per_head},
       {"aggregate", r.aggregate},
       {"samples", r.samples},
       {"cls_excluded", r.cls_excluded},
       {"distance_normalized", r.distance_normalized}};
}

namespace detail {

// Drop row/column 0 (the CLS position) and renormalize rows.
inline Tensor strip_cls(const Tensor& w) {
  std::int64_t n = w.rows();
  if (n < 2) throw ParamError("span: cannot exclude CLS from a 1x1 matrix");
  Tensor out = Tensor::zeros({n - 1, n - 1});
  for (std::int64_t i = 1; i < n; ++i) {
    double row = 0.0;
    for (std::int64_t j = 1; j < n; ++j) row += w.at(i, j);
    if (row <= 0.0) throw NumericError("span: CLS exclusion left an empty row");
    for (std::int64_t j = 1; j < n; ++j)
      out.at(i - 1, j - 1) = static_cast<float>(w.at(i, j) / row);
  }
  return out;
}

}  // namespace detail

// Mean span per (layer, head) over up to `samples` dataset examples, using
// captured attention weights from full forward passes. Mechanisms that never
// materialize weights (kernel, linformer, lsh) are rejected. When
// exclude_cls is set, position 0 is dropped and rows renormalized; the
// choice is recorded in the report.
inline SpanReport required_span(const model::ModelParams& p, const model::EncoderConfig& cfg,
                                const model::Dataset& data, int samples = 1000,
                                bool exclude_cls = false) {
  if (cfg.attention.kind == attn::Kind::kernel || cfg.attention.kind == attn::Kind::linformer ||
      cfg.attention.kind == attn::Kind::lsh)
    throw UnsupportedError("required_span: mechanism '" + attn::to_string(cfg.attention.kind) +
                           "' does not materialize attention weights");
  if (data.empty()) throw ParamError("required_span: empty dataset");
  NoGradGuard ng;
  int n_heads = cfg.layers * cfg.heads;
  int used = std::min<int>(samples, static_cast<int>(data.size()));
  std::vector<std::vector<double>> acc(cfg.layers, std::vector<double>(cfg.heads, 0.0));
  std::vector<std::vector<std::int64_t>> cnt(cfg.layers, std::vector<std::int64_t>(cfg.heads, 0));
  for (int s = 0; s < used; ++s) {
    model::AttentionCapture cap;
    model::forward_example(p, cfg, data[static_cast<std::size_t>(s)], nullptr, &cap);
    // layer-major, head-minor; a match model captures both towers.
    for (std::size_t k = 0; k < cap.weights.size(); ++k) {
      int layer = static_cast<int>(k / cfg.heads) % cfg.layers;
      int head = static_cast<int>(k % cfg.heads);
      Tensor w = exclude_cls ? detail::strip_cls(cap.weights[k]) : cap.weights[k];
      acc[layer][head] += attention_span(w);
      ++cnt[layer][head];
    }
  }
  SpanReport r;
  r.samples = used;
  r.cls_excluded = exclude_cls;
  r.per_head.assign(cfg.layers, std::vector<double>(cfg.heads, 0.0));
  double total = 0.0;
  for (int l = 0; l < cfg.layers; ++l)
    for (int h = 0; h < cfg.heads; ++h) {
      if (cnt[l][h] == 0) throw NumericError("required_span: no captures for a head");
      r.per_head[l][h] = acc[l][h] / static_cast<double>(cnt[l][h]);
      total += r.per_head[l][h];
    }
  r.aggregate = total / n_heads;
  return r;
}

// Argmax match rate over a batch of logit rows; ties break toward the
// lowest class index.
inline double accuracy(const std::vector<Tensor>& logits, const std::vector<int>& labels) {
  if (logits.empty()) throw ParamError("accuracy: empty batch");
  if (logits.size() != labels.size())
    throw ShapeError("accuracy: " + std::to_string(logits.size()) + " logit rows vs " +
                     std::to_string(labels.size()) + " labels");
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const Tensor& t = logits[i];
    if (t.rank() != 2 || t.rows() != 1) throw ShapeError("accuracy: each entry must be 1 x classes");
    int best = 0;
    for (std::int64_t c = 1; c < t.cols(); ++c)
      if (t.at(0, c) > t.at(0, best)) best = static_cast<int>(c);
    if (best == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.size());
}

struct ApproxError {
  double max_abs = 0.0;
  double mean_abs = 0.0;
};

inline ApproxError approx_error(const Tensor& approx, const Tensor& exact) {
  if (approx.shape() != exact.shape())
    throw ShapeError("approx_error: shape mismatch " + shape_str(approx.shape()) + " vs " +
                     shape_str(exact.shape()));
  ApproxError e;
  double sum = 0.0;
  for (std::int64_t i = 0; i < approx.numel(); ++i) {
    double d = std::abs(static_cast<double>(approx.data()[i]) - exact.data()[i]);
    e.max_abs = std::max(e.max_abs, d);
    sum += d;
  }
  e.mean_abs = approx.numel() > 0 ? sum / static_cast<double>(approx.numel()) : 0.0;
  return e;
}

}  // namespace arena::metrics
