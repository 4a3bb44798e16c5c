#pragma once

#include <map>
#include <string>
#include <vector>

#include "arena/attention.hpp"
#include "arena/model/config.hpp"

namespace arena::model {

// Name -> tensor map; iteration order is the stable parameter order used by
// the trainer and the checkpoint format.
using ModelParams = std::map<std::string, Tensor>;

namespace detail {
inline Tensor scaled_normal(Shape shape, float sigma, Rng& rng) {
  Tensor t = Tensor::randn(std::move(shape), rng);
  for (std::int64_t i = 0; i < t.numel(); ++i) t.data()[i] *= sigma;
  return t;
}
}  // namespace detail

// Deterministic scaled-normal init (sigma = 1/sqrt(model_dim)); norm gains 1,
// biases and norm shifts 0. Attention-specific parameters live under
// "layerI.attn.extra." so shapes outside attention are mechanism-independent.
inline ModelParams build_encoder(const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  const float sigma = 1.0f / std::sqrt(static_cast<float>(cfg.model_dim));
  const int d = cfg.model_dim, qd = cfg.qkv(), f = cfg.ffn_dim;
  ModelParams p;
  auto normal = [&](const std::string& name, Shape shape) {
    p[name] = detail::scaled_normal(std::move(shape), sigma, rng);
  };
  normal("embed.tok", {cfg.vocab_size + 2, d});
  normal("embed.pos", {cfg.max_len, d});
  for (int l = 0; l < cfg.layers; ++l) {
    std::string pre = "layer" + std::to_string(l) + ".";
    normal(pre + "attn.wq", {d, qd});
    normal(pre + "attn.wk", {d, qd});
    normal(pre + "attn.wv", {d, qd});
    normal(pre + "attn.wo", {qd, d});
    p[pre + "norm1.gamma"] = Tensor::ones({1, d});
    p[pre + "norm1.beta"] = Tensor::zeros({1, d});
    p[pre + "norm2.gamma"] = Tensor::ones({1, d});
    p[pre + "norm2.beta"] = Tensor::zeros({1, d});
    normal(pre + "ffn.w1", {d, f});
    p[pre + "ffn.b1"] = Tensor::zeros({1, f});
    normal(pre + "ffn.w2", {f, d});
    p[pre + "ffn.b2"] = Tensor::zeros({1, d});
    switch (cfg.attention.kind) {
      case attn::Kind::linformer:
        // Shared between keys and values, not across layers.
        normal(pre + "attn.extra.proj", {cfg.attention.rank, cfg.max_len});
        if (!cfg.attention.share_kv_projection)
          normal(pre + "attn.extra.proj_v", {cfg.attention.rank, cfg.max_len});
        break;
      case attn::Kind::synthesizer:
        if (cfg.attention.synth_kind == attn::SynthKind::dense) {
          int hd = cfg.head_dim();
          normal(pre + "attn.extra.synth_w1", {hd, hd});
          normal(pre + "attn.extra.synth_w2", {hd, cfg.max_len});
        } else {
          normal(pre + "attn.extra.synth_r", {cfg.max_len, cfg.max_len});
        }
        break;
      default:
        break;
    }
  }
  p["final_norm.gamma"] = Tensor::ones({1, d});
  p["final_norm.beta"] = Tensor::zeros({1, d});
  int head_in = cfg.head_kind == HeadKind::match ? 4 * d : d;
  int head_out = cfg.head_kind == HeadKind::match ? 2 : cfg.num_classes;
  normal("head.w1", {head_in, d});
  p["head.b1"] = Tensor::zeros({1, d});
  normal("head.w2", {d, head_out});
  p["head.b2"] = Tensor::zeros({1, head_out});
  return p;
}

// Optional per-head attention weight capture for the span metric.
struct AttentionCapture {
  std::vector<Tensor> weights;  // layer-major, head-minor; S x S each
};

namespace detail {

inline const Tensor& param(const ModelParams& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) throw ConfigError("model: missing parameter '" + name + "'");
  return it->second;
}

// One attention sublayer on the already-normalized input y (S rows, true
// length only, so every mechanism is padding-invariant by construction).
inline Tensor attention_sublayer(const ModelParams& p, const EncoderConfig& cfg, int layer,
                                 const Tensor& y, Rng* feature_rng, AttentionCapture* capture) {
  const std::string pre = "layer" + std::to_string(layer) + ".";
  const attn::AttentionSpec& spec = cfg.attention;
  const std::int64_t s = y.rows();
  const int hd = cfg.head_dim();
  Tensor q = matmul(y, param(p, pre + "attn.wq"));
  Tensor k = matmul(y, param(p, pre + "attn.wk"));
  Tensor v = matmul(y, param(p, pre + "attn.wv"));
  std::vector<Tensor> heads;
  for (int h = 0; h < cfg.heads; ++h) {
    Tensor qh = slice_cols(q, h * hd, (h + 1) * hd);
    Tensor kh = slice_cols(k, h * hd, (h + 1) * hd);
    Tensor vh = slice_cols(v, h * hd, (h + 1) * hd);
    attn::AttentionOutput ao;
    switch (spec.kind) {
      case attn::Kind::full:
        ao = attn::full_attention(qh, kh, vh);
        break;
      case attn::Kind::pattern: {
        attn::PatternParams pp{std::min<int>(spec.window, static_cast<int>(s)), spec.stride,
                               spec.global_tokens, spec.random_per_row};
        Rng prng(0x9a77e124u ^ (static_cast<std::uint64_t>(layer) << 8) ^ h);
        auto pattern = attn::build_sparsity_pattern(spec.pattern_kind, pp, s, &prng);
        ao = attn::pattern_attention(qh, kh, vh, pattern);
        break;
      }
      case attn::Kind::linformer: {
        const Tensor& e_full = param(p, pre + "attn.extra.proj");
        Tensor e = slice_cols(e_full, 0, s);
        Tensor fproj = spec.share_kv_projection
                           ? e
                           : slice_cols(param(p, pre + "attn.extra.proj_v"), 0, s);
        ao = attn::linformer_attention(qh, kh, vh, e, fproj);
        break;
      }
      case attn::Kind::kernel: {
        if (spec.feature_map == attn::FeatureMap::favor_plus) {
          Tensor w;
          if (spec.freeze_features || feature_rng == nullptr) {
            Rng frozen(0xfa40eb57u ^ (static_cast<std::uint64_t>(layer) << 8) ^ h);
            w = attn::favor_projection(hd, spec.num_features, frozen);
          } else {
            w = attn::favor_projection(hd, spec.num_features, *feature_rng);
          }
          ao = attn::kernel_attention(qh, kh, vh, attn::FeatureMap::favor_plus, w);
        } else {
          ao = attn::kernel_attention(qh, kh, vh, attn::FeatureMap::elu1);
        }
        break;
      }
      case attn::Kind::lsh: {
        Rng hrng(0x15a9b3c1u ^ (static_cast<std::uint64_t>(layer) << 8) ^ h);
        ao = attn::lsh_attention(qh, vh, spec.hash_rounds, spec.bucket_size, hrng);
        break;
      }
      case attn::Kind::sinkhorn:
        ao = attn::sinkhorn_attention(qh, kh, vh, spec.block_size, spec.sinkhorn_iters);
        break;
      case attn::Kind::synthesizer:
        if (spec.synth_kind == attn::SynthKind::dense) {
          ao = attn::synthesizer_dense_attention(qh, vh, param(p, pre + "attn.extra.synth_w1"),
                                                 param(p, pre + "attn.extra.synth_w2"));
        } else {
          ao = attn::synthesizer_random_attention(vh, param(p, pre + "attn.extra.synth_r"));
        }
        break;
    }
    if (capture) {
      if (!ao.weights)
        throw UnsupportedError("attention capture: mechanism '" + to_string(spec.kind) +
                               "' does not expose weights");
      capture->weights.push_back(ao.weights->detached());
    }
    heads.push_back(ao.output);
  }
  Tensor ctx = cfg.heads == 1 ? heads[0] : concat_cols(heads);
  return matmul(ctx, param(p, pre + "attn.wo"));
}

inline Tensor layer_norm_named(const ModelParams& p, const std::string& pre, const Tensor& x) {
  return layer_norm_rows(x, param(p, pre + ".gamma"), param(p, pre + ".beta"));
}

// CLS + tokens through the pre-norm stack; returns the normalized CLS row.
inline Tensor encode_cls(const ModelParams& p, const EncoderConfig& cfg,
                         const std::vector<int>& tokens, Rng* feature_rng,
                         AttentionCapture* capture) {
  // True length: trailing PAD tokens are ignored entirely, which makes every
  // mechanism padding-invariant by construction.
  std::int64_t len = static_cast<std::int64_t>(tokens.size());
  while (len > 0 && tokens[static_cast<std::size_t>(len - 1)] == cfg.pad_id()) --len;
  if (len > cfg.max_len - 1)
    throw ParamError("encoder: input length " + std::to_string(len) + " exceeds max_len-1 = " +
                     std::to_string(cfg.max_len - 1) + " (truncate at the task level)");
  std::vector<std::int64_t> ids;
  ids.reserve(static_cast<std::size_t>(len + 1));
  ids.push_back(cfg.cls_id());
  for (std::int64_t i = 0; i < len; ++i) {
    int t = tokens[static_cast<std::size_t>(i)];
    if (t < 0 || t > cfg.vocab_size + 1)
      throw ParamError("encoder: token id " + std::to_string(t) + " outside vocabulary 0.." +
                       std::to_string(cfg.vocab_size + 1));
    ids.push_back(t);
  }
  std::int64_t s = static_cast<std::int64_t>(ids.size());
  std::vector<std::int64_t> pos(static_cast<std::size_t>(s));
  for (std::int64_t i = 0; i < s; ++i) pos[static_cast<std::size_t>(i)] = i;
  Tensor x = add(gather_rows(param(p, "embed.tok"), ids), gather_rows(param(p, "embed.pos"), pos));
  for (int l = 0; l < cfg.layers; ++l) {
    std::string pre = "layer" + std::to_string(l) + ".";
    Tensor y = layer_norm_named(p, pre + "norm1", x);
    x = add(x, attention_sublayer(p, cfg, l, y, feature_rng, capture));
    Tensor z = layer_norm_named(p, pre + "norm2", x);
    Tensor ff = add_rowvec(matmul(relu(add_rowvec(matmul(z, param(p, pre + "ffn.w1")),
                                                  param(p, pre + "ffn.b1"))),
                                  param(p, pre + "ffn.w2")),
                           param(p, pre + "ffn.b2"));
    x = add(x, ff);
  }
  Tensor normed = layer_norm_named(p, "final_norm", x);
  return slice_rows(normed, 0, 1);
}

inline Tensor mlp_head(const ModelParams& p, const Tensor& features) {
  Tensor h = relu(add_rowvec(matmul(features, param(p, "head.w1")), param(p, "head.b1")));
  return add_rowvec(matmul(h, param(p, "head.w2")), param(p, "head.b2"));
}

}  // namespace detail

// Class logits (1 x num_classes) from the CLS feature through a two-layer
// relu MLP head.
inline Tensor forward_classify(const ModelParams& p, const EncoderConfig& cfg,
                               const std::vector<int>& tokens, Rng* feature_rng = nullptr,
                               AttentionCapture* capture = nullptr) {
  if (cfg.head_kind != HeadKind::classify)
    throw ConfigError("forward_classify: model head is 'match'");
  return detail::mlp_head(p, detail::encode_cls(p, cfg, tokens, feature_rng, capture));
}

// Two-tower matcher with shared encoder parameters:
// logits = MLP([X1, X2, X1*X2, X1-X2]).
inline Tensor forward_match(const ModelParams& p, const EncoderConfig& cfg,
                            const std::vector<int>& doc1, const std::vector<int>& doc2,
                            Rng* feature_rng = nullptr, AttentionCapture* capture = nullptr) {
  if (cfg.head_kind != HeadKind::match)
    throw ConfigError("forward_match: model head is 'classify'");
  Tensor x1 = detail::encode_cls(p, cfg, doc1, feature_rng, capture);
  Tensor x2 = detail::encode_cls(p, cfg, doc2, feature_rng, capture);
  Tensor joint = concat_cols({x1, x2, mul(x1, x2), sub(x1, x2)});
  return detail::mlp_head(p, joint);
}

}  // namespace arena::model
