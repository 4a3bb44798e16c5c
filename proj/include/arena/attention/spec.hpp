#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "arena/core/error.hpp"

namespace arena::attn {

enum class Kind { full, pattern, linformer, kernel, lsh, sinkhorn, synthesizer };
enum class PatternKind { local, strided, fixed, longformer, bigbird };
enum class FeatureMap { elu1, favor_plus };
enum class SynthKind { dense, random };

inline std::string to_string(Kind k) {
  switch (k) {
    case Kind::full: return "full";
    case Kind::pattern: return "pattern";
    case Kind::linformer: return "linformer";
    case Kind::kernel: return "kernel";
    case Kind::lsh: return "lsh";
    case Kind::sinkhorn: return "sinkhorn";
    case Kind::synthesizer: return "synthesizer";
  }
  return "?";
}

inline std::string to_string(PatternKind k) {
  switch (k) {
    case PatternKind::local: return "local";
    case PatternKind::strided: return "strided";
    case PatternKind::fixed: return "fixed";
    case PatternKind::longformer: return "longformer";
    case PatternKind::bigbird: return "bigbird";
  }
  return "?";
}

// Mechanism selector plus the parameters of the selected mechanism. Field
// names match the JSON config schema of the bench CLI.
struct AttentionSpec {
  Kind kind = Kind::full;

  // pattern
  PatternKind pattern_kind = PatternKind::local;
  int window = 8;        // local band half-width
  int stride = 4;        // strided/fixed summary stride
  int global_tokens = 1; // longformer/bigbird global positions
  int random_per_row = 2;  // bigbird random entries per row

  // linformer
  int rank = 64;  // k summary rows
  bool share_kv_projection = true;

  // kernel
  FeatureMap feature_map = FeatureMap::elu1;
  int num_features = 64;       // m, favor_plus only
  bool freeze_features = false;  // redraw FAVOR+ projections per forward unless set

  // lsh
  int hash_rounds = 2;
  int bucket_size = 16;

  // sinkhorn
  int block_size = 16;
  int sinkhorn_iters = 8;

  // synthesizer
  SynthKind synth_kind = SynthKind::dense;

  void validate(int max_len) const {
    auto positive = [](int v, const char* name) {
      if (v < 1) throw ParamError(std::string("attention spec: ") + name + " must be >= 1, got " +
                                  std::to_string(v));
    };
    switch (kind) {
      case Kind::full:
        break;
      case Kind::pattern:
        positive(window, "window");
        if (window > max_len)
          throw ParamError("attention spec: window " + std::to_string(window) + " exceeds max length " +
                           std::to_string(max_len));
        if (pattern_kind == PatternKind::strided || pattern_kind == PatternKind::fixed)
          positive(stride, "stride");
        if (pattern_kind == PatternKind::longformer || pattern_kind == PatternKind::bigbird)
          positive(global_tokens, "global_tokens");
        if (pattern_kind == PatternKind::bigbird) positive(random_per_row, "random_per_row");
        break;
      case Kind::linformer:
        positive(rank, "rank");
        break;
      case Kind::kernel:
        if (feature_map == FeatureMap::favor_plus) positive(num_features, "num_features");
        break;
      case Kind::lsh:
        positive(hash_rounds, "hash_rounds");
        positive(bucket_size, "bucket_size");
        break;
      case Kind::sinkhorn:
        positive(block_size, "block_size");
        positive(sinkhorn_iters, "sinkhorn_iters");
        break;
      case Kind::synthesizer:
        break;
    }
  }

  // Mask-emulated mechanisms are excluded from speed rankings.
  bool mask_emulated() const { return kind == Kind::pattern; }
};

inline void to_json(nlohmann::json& j, const AttentionSpec& s) {
  j = nlohmann::json{{"kind", to_string(s.kind)}};
  switch (s.kind) {
    case Kind::pattern:
      j["pattern_kind"] = to_string(s.pattern_kind);
      j["window"] = s.window;
      if (s.pattern_kind == PatternKind::strided || s.pattern_kind == PatternKind::fixed)
        j["stride"] = s.stride;
      if (s.pattern_kind == PatternKind::longformer || s.pattern_kind == PatternKind::bigbird)
        j["global_tokens"] = s.global_tokens;
      if (s.pattern_kind == PatternKind::bigbird) j["random_per_row"] = s.random_per_row;
      break;
    case Kind::linformer:
      j["rank"] = s.rank;
      j["share_kv_projection"] = s.share_kv_projection;
      break;
    case Kind::kernel:
      j["feature_map"] = s.feature_map == FeatureMap::elu1 ? "elu1" : "favor_plus";
      if (s.feature_map == FeatureMap::favor_plus) {
        j["num_features"] = s.num_features;
        j["freeze_features"] = s.freeze_features;
      }
      break;
    case Kind::lsh:
      j["hash_rounds"] = s.hash_rounds;
      j["bucket_size"] = s.bucket_size;
      break;
    case Kind::sinkhorn:
      j["block_size"] = s.block_size;
      j["sinkhorn_iters"] = s.sinkhorn_iters;
      break;
    case Kind::synthesizer:
      j["synth_kind"] = s.synth_kind == SynthKind::dense ? "dense" : "random";
      break;
    case Kind::full:
      break;
  }
}

inline void from_json(const nlohmann::json& j, AttentionSpec& s) {
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "full") s.kind = Kind::full;
  else if (kind == "pattern") s.kind = Kind::pattern;
  else if (kind == "linformer") s.kind = Kind::linformer;
  else if (kind == "kernel") s.kind = Kind::kernel;
  else if (kind == "lsh") s.kind = Kind::lsh;
  else if (kind == "sinkhorn") s.kind = Kind::sinkhorn;
  else if (kind == "synthesizer") s.kind = Kind::synthesizer;
  else throw ConfigError("attention spec: unknown kind '" + kind + "'");

  if (j.contains("pattern_kind")) {
    std::string p = j["pattern_kind"].get<std::string>();
    if (p == "local") s.pattern_kind = PatternKind::local;
    else if (p == "strided") s.pattern_kind = PatternKind::strided;
    else if (p == "fixed") s.pattern_kind = PatternKind::fixed;
    else if (p == "longformer") s.pattern_kind = PatternKind::longformer;
    else if (p == "bigbird") s.pattern_kind = PatternKind::bigbird;
    else throw ConfigError("attention spec: unknown pattern_kind '" + p + "'");
  }
  if (j.contains("window")) s.window = j["window"].get<int>();
  if (j.contains("stride")) s.stride = j["stride"].get<int>();
  if (j.contains("global_tokens")) s.global_tokens = j["global_tokens"].get<int>();
  if (j.contains("random_per_row")) s.random_per_row = j["random_per_row"].get<int>();
  if (j.contains("rank")) s.rank = j["rank"].get<int>();
  if (j.contains("share_kv_projection")) s.share_kv_projection = j["share_kv_projection"].get<bool>();
  if (j.contains("feature_map")) {
    std::string f = j["feature_map"].get<std::string>();
    if (f == "elu1") s.feature_map = FeatureMap::elu1;
    else if (f == "favor_plus") s.feature_map = FeatureMap::favor_plus;
    else throw ConfigError("attention spec: unknown feature_map '" + f + "'");
  }
  if (j.contains("num_features")) s.num_features = j["num_features"].get<int>();
  if (j.contains("freeze_features")) s.freeze_features = j["freeze_features"].get<bool>();
  if (j.contains("hash_rounds")) s.hash_rounds = j["hash_rounds"].get<int>();
  if (j.contains("bucket_size")) s.bucket_size = j["bucket_size"].get<int>();
  if (j.contains("block_size")) s.block_size = j["block_size"].get<int>();
  if (j.contains("sinkhorn_iters")) s.sinkhorn_iters = j["sinkhorn_iters"].get<int>();
  if (j.contains("synth_kind")) {
    std::string sk = j["synth_kind"].get<std::string>();
    if (sk == "dense") s.synth_kind = SynthKind::dense;
    else if (sk == "random") s.synth_kind = SynthKind::random;
    else throw ConfigError("attention spec: unknown synth_kind '" + sk + "'");
  }
}

}  // namespace arena::attn
