#pragma once

#include <cmath>
#include <numeric>
#include <vector>

#include "arena/model/encoder.hpp"

namespace arena::model {

// One labeled example. tokens2 is empty except for match-head tasks.
struct Example {
  std::vector<int> tokens;
  std::vector<int> tokens2;
  int label = 0;
};

using Dataset = std::vector<Example>;

struct StepRecord {
  int step = 0;
  float loss = 0.0f;
  float lr = 0.0f;
  float eval_accuracy = -1.0f;  // < 0 when not evaluated this step
};

struct TrainHistory {
  std::vector<StepRecord> steps;
};

inline Tensor forward_example(const ModelParams& p, const EncoderConfig& cfg, const Example& ex,
                              Rng* feature_rng = nullptr, AttentionCapture* capture = nullptr) {
  return cfg.head_kind == HeadKind::match
             ? forward_match(p, cfg, ex.tokens, ex.tokens2, feature_rng, capture)
             : forward_classify(p, cfg, ex.tokens, feature_rng, capture);
}

inline float eval_accuracy(const ModelParams& p, const EncoderConfig& cfg, const Dataset& data) {
  if (data.empty()) throw ParamError("eval: empty dataset");
  NoGradGuard ng;
  std::int64_t hits = 0;
  for (const Example& ex : data) {
    Tensor logits = forward_example(p, cfg, ex);
    std::int64_t best = 0;
    for (std::int64_t c = 1; c < logits.cols(); ++c)
      if (logits.at(0, c) > logits.at(0, best)) best = c;  // ties -> lowest index
    hits += best == ex.label;
  }
  return static_cast<float>(static_cast<double>(hits) / static_cast<double>(data.size()));
}

// Adam with linear warmup from 0 to learning_rate over warmup_steps, then
// constant. Gradients are accumulated per example so activation memory never
// scales with batch size; weight decay is decoupled from the Adam moments.
inline TrainHistory train(ModelParams& params, const EncoderConfig& cfg, const TrainConfig& tc,
                          const Dataset& data, const Dataset* eval_data = nullptr) {
  cfg.validate();
  tc.validate();
  if (data.empty()) throw ParamError("train: empty dataset");

  std::vector<std::string> names;
  std::vector<Tensor> tensors;
  for (auto& [name, t] : params) {
    names.push_back(name);
    tensors.push_back(t);
  }
  std::vector<Tensor> m, v;
  for (const Tensor& t : tensors) {
    m.push_back(Tensor::zeros(t.shape()));
    v.push_back(Tensor::zeros(t.shape()));
  }
  const float beta1 = 0.9f, beta2 = 0.999f, adam_eps = 1e-8f;

  Rng order_rng(tc.seed);
  Rng feature_rng(tc.seed ^ 0x7e47'55d1'9b3c'a2f0ULL);
  std::vector<std::size_t> perm(data.size());
  std::iota(perm.begin(), perm.end(), 0);
  order_rng.shuffle(perm);
  std::size_t cursor = 0;

  TrainHistory history;
  for (int step = 0; step < tc.steps; ++step) {
    std::vector<Tensor> grad_accum;
    for (const Tensor& t : tensors) grad_accum.push_back(Tensor::zeros(t.shape()));
    double loss_sum = 0;
    for (int b = 0; b < tc.batch_size; ++b) {
      if (cursor == perm.size()) {
        order_rng.shuffle(perm);
        cursor = 0;
      }
      const Example& ex = data[perm[cursor++]];
      Tensor logits = forward_example(params, cfg, ex, &feature_rng);
      Tensor loss = cross_entropy(logits, {ex.label});
      float lv = loss.item();
      if (!std::isfinite(lv))
        throw NumericError("train: non-finite loss " + std::to_string(lv) + " at step " +
                           std::to_string(step));
      loss_sum += lv;
      std::vector<Tensor> grads = Tape::grad(loss, tensors, /*allow_unreachable=*/true);
      NoGradGuard ng;
      for (std::size_t i = 0; i < tensors.size(); ++i)
        for (std::int64_t j = 0; j < grads[i].numel(); ++j)
          grad_accum[i].data()[j] += grads[i].data()[j] / static_cast<float>(tc.batch_size);
    }
    float lr = tc.learning_rate;
    if (tc.warmup_steps > 0 && step < tc.warmup_steps)
      lr *= static_cast<float>(step + 1) / static_cast<float>(tc.warmup_steps);
    {
      NoGradGuard ng;
      double bc1 = 1.0 - std::pow(beta1, step + 1);
      double bc2 = 1.0 - std::pow(beta2, step + 1);
      for (std::size_t i = 0; i < tensors.size(); ++i) {
        float* pd = tensors[i].data();
        float* gd = grad_accum[i].data();
        float* md = m[i].data();
        float* vd = v[i].data();
        for (std::int64_t j = 0; j < tensors[i].numel(); ++j) {
          md[j] = beta1 * md[j] + (1 - beta1) * gd[j];
          vd[j] = beta2 * vd[j] + (1 - beta2) * gd[j] * gd[j];
          double mhat = md[j] / bc1, vhat = vd[j] / bc2;
          pd[j] -= static_cast<float>(lr * (mhat / (std::sqrt(vhat) + adam_eps) +
                                            tc.weight_decay * pd[j]));
        }
      }
    }
    StepRecord rec;
    rec.step = step;
    rec.loss = static_cast<float>(loss_sum / tc.batch_size);
    rec.lr = lr;
    if (eval_data && tc.eval_every > 0 && (step + 1) % tc.eval_every == 0)
      rec.eval_accuracy = eval_accuracy(params, cfg, *eval_data);
    history.steps.push_back(rec);
  }
  return history;
}

}  // namespace arena::model
