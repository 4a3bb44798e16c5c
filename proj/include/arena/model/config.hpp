#pragma once

#include <string>

#include "arena/attention/spec.hpp"
#include "arena/core/error.hpp"

namespace arena::model {

enum class HeadKind { classify, match };

inline std::string to_string(HeadKind h) { return h == HeadKind::classify ? "classify" : "match"; }

struct EncoderConfig {
  int layers = 2;
  int heads = 2;
  int model_dim = 64;
  int qkv_dim = 0;  // total across heads; 0 means model_dim
  int ffn_dim = 128;
  int max_len = 256;    // includes the CLS position
  int vocab_size = 16;  // data vocabulary; PAD and CLS ids are appended after it
  attn::AttentionSpec attention;
  HeadKind head_kind = HeadKind::classify;
  int num_classes = 10;

  int qkv() const { return qkv_dim > 0 ? qkv_dim : model_dim; }
  int head_dim() const { return qkv() / heads; }
  int pad_id() const { return vocab_size; }
  int cls_id() const { return vocab_size + 1; }

  void validate() const {
    if (layers < 1) throw ConfigError("encoder config: layers must be >= 1");
    if (heads < 1) throw ConfigError("encoder config: heads must be >= 1");
    if (model_dim < 1 || ffn_dim < 1 || max_len < 2 || vocab_size < 1 || num_classes < 2)
      throw ConfigError("encoder config: dimensions must be positive (max_len >= 2 for CLS)");
    if (model_dim % heads != 0)
      throw ConfigError("encoder config: model_dim " + std::to_string(model_dim) +
                        " not divisible by heads " + std::to_string(heads));
    if (qkv() % heads != 0)
      throw ConfigError("encoder config: qkv_dim " + std::to_string(qkv()) +
                        " not divisible by heads " + std::to_string(heads));
    attention.validate(max_len);
  }
};

inline void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = nlohmann::json{{"layers", c.layers},       {"heads", c.heads},
                     {"model_dim", c.model_dim}, {"qkv_dim", c.qkv_dim},
                     {"ffn_dim", c.ffn_dim},     {"max_len", c.max_len},
                     {"vocab_size", c.vocab_size},
                     {"attention", c.attention},
                     {"head_kind", to_string(c.head_kind)},
                     {"num_classes", c.num_classes}};
}

inline void from_json(const nlohmann::json& j, EncoderConfig& c) {
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.model_dim = j.at("model_dim").get<int>();
  if (j.contains("qkv_dim")) c.qkv_dim = j["qkv_dim"].get<int>();
  c.ffn_dim = j.at("ffn_dim").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  if (j.contains("attention")) c.attention = j["attention"].get<attn::AttentionSpec>();
  if (j.contains("head_kind")) {
    std::string h = j["head_kind"].get<std::string>();
    if (h == "classify") c.head_kind = HeadKind::classify;
    else if (h == "match") c.head_kind = HeadKind::match;
    else throw ConfigError("encoder config: unknown head_kind '" + h + "'");
  }
  c.num_classes = j.at("num_classes").get<int>();
}

struct TrainConfig {
  int steps = 100;
  int batch_size = 8;
  float learning_rate = 1e-3f;
  int warmup_steps = 10;
  float weight_decay = 0.0f;
  std::uint64_t seed = 0;
  int eval_every = 0;  // 0 disables periodic eval

  void validate() const {
    if (steps < 1) throw ConfigError("train config: steps must be >= 1");
    if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
    if (warmup_steps > steps)
      throw ConfigError("train config: warmup_steps " + std::to_string(warmup_steps) +
                        " exceeds steps " + std::to_string(steps));
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"steps", c.steps},
                     {"batch_size", c.batch_size},
                     {"learning_rate", c.learning_rate},
                     {"warmup_steps", c.warmup_steps},
                     {"weight_decay", c.weight_decay},
                     {"seed", c.seed},
                     {"eval_every", c.eval_every}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (j.contains("steps")) c.steps = j["steps"].get<int>();
  if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
  if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<float>();
  if (j.contains("warmup_steps")) c.warmup_steps = j["warmup_steps"].get<int>();
  if (j.contains("weight_decay")) c.weight_decay = j["weight_decay"].get<float>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("eval_every")) c.eval_every = j["eval_every"].get<int>();
}

}  // namespace arena::model
