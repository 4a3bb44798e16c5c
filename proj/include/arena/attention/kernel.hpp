#pragma once

#include <cmath>

#include "arena/attention/linformer.hpp"
#include "arena/attention/spec.hpp"
#include "arena/core/rng.hpp"

namespace arena::attn {

// FAVOR+ projection rows: Gaussian, orthogonalized Gram-Schmidt within each
// d-row block, each row rescaled to the norm of its originally drawn Gaussian.
inline Tensor favor_projection(std::int64_t d, std::int64_t m, Rng& rng) {
  if (m < 1) throw ParamError("favor_projection: m must be >= 1");
  Tensor w = Tensor::randn({m, d}, rng);
  for (std::int64_t b0 = 0; b0 < m; b0 += d) {
    std::int64_t b1 = std::min(m, b0 + d);
    for (std::int64_t i = b0; i < b1; ++i) {
      double orig_norm = 0;
      for (std::int64_t c = 0; c < d; ++c) orig_norm += static_cast<double>(w.at(i, c)) * w.at(i, c);
      orig_norm = std::sqrt(orig_norm);
      for (std::int64_t j = b0; j < i; ++j) {
        double dot = 0;
        for (std::int64_t c = 0; c < d; ++c) dot += static_cast<double>(w.at(i, c)) * w.at(j, c);
        double jj = 0;
        for (std::int64_t c = 0; c < d; ++c) jj += static_cast<double>(w.at(j, c)) * w.at(j, c);
        if (jj > 0)
          for (std::int64_t c = 0; c < d; ++c)
            w.at(i, c) -= static_cast<float>(dot / jj * w.at(j, c));
      }
      double now = 0;
      for (std::int64_t c = 0; c < d; ++c) now += static_cast<double>(w.at(i, c)) * w.at(i, c);
      now = std::sqrt(now);
      if (now > 0)
        for (std::int64_t c = 0; c < d; ++c)
          w.at(i, c) = static_cast<float>(w.at(i, c) * (orig_norm / now));
    }
  }
  return w;
}

namespace detail {
// Positive random features for one row block: phi(x)_j = exp(w_j.x - |x|^2/2) / sqrt(m).
inline Tensor favor_block(const Tensor& x, const Tensor& w) {
  std::int64_t n = x.rows(), d = x.cols(), m = w.rows();
  Tensor phi = Tensor::zeros({n, m});
  float inv_sqrt_m = 1.0f / std::sqrt(static_cast<float>(m));
  for (std::int64_t i = 0; i < n; ++i) {
    double nx = 0;
    for (std::int64_t c = 0; c < d; ++c) nx += static_cast<double>(x.at(i, c)) * x.at(i, c);
    for (std::int64_t j = 0; j < m; ++j) {
      double dot = 0;
      for (std::int64_t c = 0; c < d; ++c) dot += static_cast<double>(w.at(j, c)) * x.at(i, c);
      phi.at(i, j) = static_cast<float>(std::exp(dot - nx / 2) * inv_sqrt_m);
    }
  }
  return phi;
}

inline Tensor elu1_block(const Tensor& x) {
  Tensor phi = Tensor::zeros(x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) phi.data()[i] = elu1_scalar(x.data()[i]);
  return phi;
}
}  // namespace detail

// Standalone differentiable FAVOR+ feature map (rows of W treated as fixed).
inline Tensor random_feature_map(const Tensor& x, const Tensor& w) {
  if (x.rank() != 2 || w.rank() != 2 || w.cols() != x.cols())
    throw ShapeError("random_feature_map: X " + shape_str(x.shape()) + " vs W " +
                     shape_str(w.shape()));
  Tensor phi;
  {
    NoGradGuard ng;
    phi = detail::favor_block(x, w);
  }
  Tensor saved = phi;
  auto vjp = [x, w, saved](const Tensor& g) {
    NoGradGuard ng;
    Tensor gp = mul(g, saved);
    Tensor dx = matmul(gp, w);
    Tensor rs = row_sum(gp);
    for (std::int64_t i = 0; i < x.rows(); ++i)
      for (std::int64_t c = 0; c < x.cols(); ++c) dx.at(i, c) -= rs.at(i, 0) * x.at(i, c);
    return std::vector<Tensor>{dx, Tensor()};
  };
  return record(std::move(phi), {x, w}, std::move(vjp));
}

inline Tensor random_feature_map(const Tensor& x, std::int64_t m, Rng& rng) {
  return random_feature_map(x, favor_projection(x.cols(), m, rng));
}

// Kernel attention: out_i = phi(q_i)^T (sum_j phi(k_j) v_j^T) / (phi(q_i) . sum_j phi(k_j)),
// streamed in fixed-size chunks so the N x N matrix is never materialized and
// working memory beyond the output is constant. elu1 uses phi = elu(x)+1
// elementwise; favor_plus uses positive random features of W and pre-scales
// inputs by d^(-1/4) so it estimates softmax(QK^T/sqrt(d)) V.
inline AttentionOutput kernel_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                        FeatureMap map, const Tensor& w = Tensor()) {
  detail::check_qkv(q, k, v);
  if (map == FeatureMap::favor_plus && (!w.defined() || w.cols() != q.cols()))
    throw ParamError("kernel_attention: favor_plus requires a projection with matching dim");

  const std::int64_t n = q.rows(), nk = k.rows(), d = q.cols(), dv = v.cols();
  const float in_scale =
      map == FeatureMap::favor_plus ? std::pow(static_cast<float>(d), -0.25f) : 1.0f;
  const std::int64_t p = map == FeatureMap::favor_plus ? w.rows() : d;

  auto features = [map, w, in_scale](const Tensor& x) {
    if (map == FeatureMap::favor_plus) {
      Tensor xs = scale(x, in_scale);
      return detail::favor_block(xs, w);
    }
    return detail::elu1_block(x);
  };

  Tensor out, s, z, den;
  {
    NoGradGuard ng;
    s = Tensor::zeros({p, dv});
    z = Tensor::zeros({p, 1});
    for (std::int64_t r0 = 0; r0 < nk; r0 += kStreamChunk) {
      std::int64_t r1 = std::min(nk, r0 + kStreamChunk);
      Tensor phik = features(slice_rows(k, r0, r1));
      detail::accum(s, matmul(transpose(phik), slice_rows(v, r0, r1)));
      detail::accum(z, row_sum(transpose(phik)));
    }
    out = Tensor::zeros({n, dv});
    den = Tensor::zeros({n, 1});
    for (std::int64_t r0 = 0; r0 < n; r0 += kStreamChunk) {
      std::int64_t r1 = std::min(n, r0 + kStreamChunk);
      Tensor phiq = features(slice_rows(q, r0, r1));
      Tensor num = matmul(phiq, s);
      Tensor dc = matmul(phiq, z);
      for (std::int64_t i = 0; i < dc.numel(); ++i) {
        if (dc.at(i) < kEps)
          throw NumericError("kernel_attention: normalizer " + std::to_string(dc.at(i)) +
                             " below epsilon at row " + std::to_string(r0 + i));
        den.at(r0 + i, 0) = dc.at(i);
      }
      for (std::int64_t i = 0; i < r1 - r0; ++i)
        for (std::int64_t c = 0; c < dv; ++c) out.at(r0 + i, c) = num.at(i, c) / dc.at(i);
    }
  }

  auto backprop_features = [map, w, in_scale](const Tensor& xc, const Tensor& phi,
                                               const Tensor& dphi) {
    NoGradGuard ng;
    if (map == FeatureMap::favor_plus) {
      Tensor gp = mul(dphi, phi);
      Tensor dxs = matmul(gp, w);
      Tensor rs = row_sum(gp);
      for (std::int64_t i = 0; i < xc.rows(); ++i)
        for (std::int64_t c = 0; c < xc.cols(); ++c)
          dxs.at(i, c) -= rs.at(i, 0) * (xc.at(i, c) * in_scale);
      return scale(dxs, in_scale);
    }
    Tensor dx = Tensor::zeros(xc.shape());
    for (std::int64_t i = 0; i < xc.numel(); ++i)
      dx.data()[i] = dphi.data()[i] * elu1_grad_scalar(xc.data()[i]);
    return dx;
  };

  auto vjp = [q, k, v, s, z, den, out, features, backprop_features, n, nk, dv](const Tensor& g) {
    NoGradGuard ng;
    Tensor ds = Tensor::zeros(s.shape());
    Tensor dz = Tensor::zeros(z.shape());
    Tensor dq = Tensor::zeros(q.shape());
    for (std::int64_t r0 = 0; r0 < n; r0 += kStreamChunk) {
      std::int64_t r1 = std::min(n, r0 + kStreamChunk);
      Tensor qc = slice_rows(q, r0, r1);
      Tensor phiq = features(qc);
      Tensor gc = slice_rows(g, r0, r1);
      Tensor denc = slice_rows(den, r0, r1);
      Tensor dnum = div_colvec(gc, denc);
      // dden_i = -(out_i . g_i) / den_i  (out already includes one /den)
      Tensor outc = slice_rows(out, r0, r1);
      Tensor dden = Tensor::zeros({r1 - r0, 1});
      for (std::int64_t i = 0; i < r1 - r0; ++i) {
        double acc = 0;
        for (std::int64_t c = 0; c < dv; ++c)
          acc += static_cast<double>(outc.at(i, c)) * gc.at(i, c);
        dden.at(i, 0) = static_cast<float>(-acc / denc.at(i, 0));
      }
      Tensor dphiq = matmul(dnum, transpose(s));
      for (std::int64_t i = 0; i < r1 - r0; ++i)
        for (std::int64_t j = 0; j < s.rows(); ++j)
          dphiq.at(i, j) += dden.at(i, 0) * z.at(j, 0);
      detail::accum(ds, matmul(transpose(phiq), dnum));
      detail::accum(dz, matmul(transpose(phiq), dden));
      Tensor dqc = backprop_features(qc, phiq, dphiq);
      std::copy(dqc.data(), dqc.data() + dqc.numel(), dq.data() + r0 * q.cols());
    }
    Tensor dk = Tensor::zeros(k.shape());
    Tensor dvv = Tensor::zeros(v.shape());
    for (std::int64_t r0 = 0; r0 < nk; r0 += kStreamChunk) {
      std::int64_t r1 = std::min(nk, r0 + kStreamChunk);
      Tensor kc = slice_rows(k, r0, r1);
      Tensor phik = features(kc);
      Tensor dphik = matmul(slice_rows(v, r0, r1), transpose(ds));
      for (std::int64_t i = 0; i < r1 - r0; ++i)
        for (std::int64_t j = 0; j < ds.rows(); ++j) dphik.at(i, j) += dz.at(j, 0);
      Tensor dkc = backprop_features(kc, phik, dphik);
      std::copy(dkc.data(), dkc.data() + dkc.numel(), dk.data() + r0 * k.cols());
      Tensor dvc = matmul(phik, ds);
      std::copy(dvc.data(), dvc.data() + dvc.numel(), dvv.data() + r0 * v.cols());
    }
    return std::vector<Tensor>{dq, dk, dvv};
  };
  return {record(std::move(out), {q, k, v}, std::move(vjp)), std::nullopt};
}

}  // namespace arena::attn
