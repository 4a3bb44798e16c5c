#pragma once

// Benchmark harness: throughput (train steps per second over a warmed-up
// measured window) and peak live tensor bytes for one train step, swept over
// mechanisms x sequence lengths, with JSON and CSV report emission.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "arena/core/error.hpp"
#include "arena/core/memory.hpp"
#include "arena/core/rng.hpp"
#include "arena/metrics/metrics.hpp"
#include "arena/model/config.hpp"
#include "arena/model/encoder.hpp"
#include "arena/model/train.hpp"

namespace arena::bench {

struct SuiteConfig {
  std::vector<attn::AttentionSpec> mechanisms;
  model::EncoderConfig encoder;        // shared preset; max_len must cover lengths
  model::TrainConfig train;            // batch size / lr for measured steps
  std::vector<int> seq_lens = {1024, 2048, 3072, 4096};
  int warmup_steps = 10;
  int measured_steps = 50;
  std::uint64_t seed = 0;
  std::string out_dir = ".";

  void validate() const {
    if (mechanisms.empty()) throw ConfigError("suite: empty mechanism list");
    if (seq_lens.empty()) throw ConfigError("suite: empty sequence-length list");
    if (measured_steps < 1) throw ConfigError("suite: measured_steps must be >= 1");
    if (warmup_steps < 0) throw ConfigError("suite: warmup_steps must be >= 0");
    for (int n : seq_lens)
      if (n < 1 || n + 1 > encoder.max_len)
        throw ConfigError("suite: sequence length " + std::to_string(n) +
                          " exceeds encoder max_len " + std::to_string(encoder.max_len));
  }
};

inline void to_json(nlohmann::json& j, const SuiteConfig& c) {
  j = {{"mechanisms", c.mechanisms}, {"encoder", c.encoder},   {"train", c.train},
       {"seq_lens", c.seq_lens},     {"warmup_steps", c.warmup_steps},
       {"measured_steps", c.measured_steps}, {"seed", c.seed}, {"out_dir", c.out_dir}};
}

inline void from_json(const nlohmann::json& j, SuiteConfig& c) {
  c.mechanisms = j.at("mechanisms").get<std::vector<attn::AttentionSpec>>();
  c.encoder = j.at("encoder").get<model::EncoderConfig>();
  if (j.contains("train")) c.train = j.at("train").get<model::TrainConfig>();
  if (j.contains("seq_lens")) c.seq_lens = j.at("seq_lens").get<std::vector<int>>();
  if (j.contains("warmup_steps")) c.warmup_steps = j.at("warmup_steps").get<int>();
  if (j.contains("measured_steps")) c.measured_steps = j.at("measured_steps").get<int>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
}

// FNV-1a over the canonical (sorted-key, no-whitespace) JSON dump, so
// semantically identical configs hash identically regardless of key order.
inline std::uint64_t config_hash(const nlohmann::json& j) {
  std::string canon = j.dump();  // nlohmann objects serialize with sorted keys
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

struct BenchRow {
  std::string mechanism;
  std::string task = "synthetic";
  int seq_len = 0;
  double steps_per_sec = -1.0;       // < 0 when speed-excluded or failed
  std::int64_t peak_tensor_bytes = -1;
  double relative_speedup_vs_full = -1.0;  // < 0 when either side missing
  double accuracy = -1.0;            // < 0 when not evaluated
  double span = -1.0;                // < 0 when unsupported/not measured
  bool speed_excluded = false;       // mask-emulated mechanisms
  bool failed = false;
  std::string error;
};

inline void to_json(nlohmann::json& j, const BenchRow& r) {
  j = {{"mechanism", r.mechanism},
       {"task", r.task},
       {"seq_len", r.seq_len},
       {"steps_per_sec", r.steps_per_sec},
       {"peak_tensor_bytes", r.peak_tensor_bytes},
       {"relative_speedup_vs_full", r.relative_speedup_vs_full},
       {"accuracy", r.accuracy},
       {"span", r.span},
       {"speed_excluded", r.speed_excluded},
       {"failed", r.failed},
       {"error", r.error}};
}

struct BenchReport {
  std::vector<BenchRow> rows;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  int batch_size = 0;
  std::string hardware_note;
  std::string timestamp;
  std::string timing_note = "steps_per_sec counts full train steps (forward+backward+update)";
};

inline void to_json(nlohmann::json& j, const BenchReport& r) {
  j = {{"rows", r.rows},
       {"metadata",
        {{"seed", r.seed},
         {"config_hash", r.config_hash},
         {"batch_size", r.batch_size},
         {"hardware_note", r.hardware_note},
         {"timestamp", r.timestamp},
         {"timing_note", r.timing_note}}}};
}

// Fixed, documented CSV column order.
inline const char* kCsvHeader =
    "mechanism,task,seq_len,steps_per_sec,peak_tensor_bytes,relative_speedup_vs_full,"
    "accuracy,span,speed_excluded,failed";

inline void write_csv(const std::string& path, const BenchReport& r) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("write_csv: cannot open " + path);
  f << kCsvHeader << "\n";
  for (const auto& row : r.rows)
    f << row.mechanism << ',' << row.task << ',' << row.seq_len << ',' << row.steps_per_sec << ','
      << row.peak_tensor_bytes << ',' << row.relative_speedup_vs_full << ',' << row.accuracy << ','
      << row.span << ',' << (row.speed_excluded ? 1 : 0) << ',' << (row.failed ? 1 : 0) << "\n";
}

namespace detail {

// Random token batch of the requested length (ids in the data vocabulary).
inline model::Dataset synthetic_batch(Rng& rng, const model::EncoderConfig& cfg, int seq_len,
                                      int batch) {
  model::Dataset data;
  data.reserve(static_cast<std::size_t>(batch));
  for (int b = 0; b < batch; ++b) {
    model::Example ex;
    ex.tokens.resize(static_cast<std::size_t>(seq_len));
    for (auto& t : ex.tokens) t = static_cast<int>(rng.uniform_int(cfg.vocab_size));
    if (cfg.head_kind == model::HeadKind::match) ex.tokens2 = ex.tokens;
    ex.label = static_cast<int>(rng.uniform_int(cfg.num_classes));
    data.push_back(std::move(ex));
  }
  return data;
}

}  // namespace detail

// Wall-clock steps/sec of full train steps (forward + backward + optimizer
// update) at the given length, monotonic clock, warmup excluded.
inline double measure_throughput(model::ModelParams params, const model::EncoderConfig& cfg,
                                 const model::TrainConfig& tc, int seq_len, int warmup,
                                 int steps) {
  if (steps < 1) throw ParamError("measure_throughput: steps must be >= 1");
  if (warmup < 0) throw ParamError("measure_throughput: warmup must be >= 0");
  Rng rng(tc.seed ^ 0x1f3d5b79u);
  model::Dataset data = detail::synthetic_batch(rng, cfg, seq_len, tc.batch_size);
  auto run_steps = [&](int n) {
    model::TrainConfig step_tc = tc;
    step_tc.steps = n;
    step_tc.warmup_steps = 0;
    step_tc.eval_every = 0;
    model::train(params, cfg, step_tc, data);
  };
  run_steps(warmup > 0 ? warmup : 1);
  auto t0 = std::chrono::steady_clock::now();
  run_steps(steps);
  auto t1 = std::chrono::steady_clock::now();
  double secs = std::chrono::duration<double>(t1 - t0).count();
  if (secs <= 0.0) throw NumericError("measure_throughput: zero elapsed time");
  return static_cast<double>(steps) / secs;
}

// Peak live tensor bytes across one full train step on a batch.
inline std::int64_t measure_memory(model::ModelParams params, const model::EncoderConfig& cfg,
                                   const model::TrainConfig& tc, int seq_len) {
  Rng rng(tc.seed ^ 0x2b7e1519u);
  model::Dataset data = detail::synthetic_batch(rng, cfg, seq_len, tc.batch_size);
  return measure_scope_bytes([&] {
    model::TrainConfig step_tc = tc;
    step_tc.steps = 1;
    step_tc.warmup_steps = 0;
    step_tc.eval_every = 0;
    model::train(params, cfg, step_tc, data);
  });
}

inline bool speed_excluded_kind(const attn::AttentionSpec& s) {
  // Sparsity patterns are emulated with dense masks, so their wall-clock is
  // not representative and they are excluded from the speed ranking.
  return s.kind == attn::Kind::pattern;
}

inline std::string now_timestamp() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", std::gmtime(&t));
  return buf;
}

// Cross product of mechanisms x lengths, strictly sequential for timing
// isolation. A failing cell records its error and the sweep continues.
inline BenchReport run_suite(const SuiteConfig& sc) {
  sc.validate();
  BenchReport report;
  report.seed = sc.seed;
  nlohmann::json cfg_json = sc;
  report.config_hash = config_hash(cfg_json);
  report.batch_size = sc.train.batch_size;
  report.hardware_note = "single-thread CPU, desk scale";
  report.timestamp = now_timestamp();
  for (const auto& mech : sc.mechanisms) {
    for (int n : sc.seq_lens) {
      BenchRow row;
      row.mechanism = attn::to_string(mech.kind);
      row.seq_len = n;
      row.speed_excluded = speed_excluded_kind(mech);
      try {
        model::EncoderConfig cfg = sc.encoder;
        cfg.attention = mech;
        cfg.validate();
        model::TrainConfig tc = sc.train;
        tc.seed = sc.seed;
        Rng init(sc.seed ^ 0x5eedu);
        model::ModelParams params = model::build_encoder(cfg, init);
        row.peak_tensor_bytes = measure_memory(params, cfg, tc, n);
        if (!row.speed_excluded)
          row.steps_per_sec = measure_throughput(params, cfg, tc, n, sc.warmup_steps,
                                                 sc.measured_steps);
      } catch (const Error& e) {
        row.failed = true;
        row.error = std::string(e.what()) + " [mechanism " + row.mechanism + ", length " +
                    std::to_string(n) + "]";
      }
      report.rows.push_back(std::move(row));
    }
  }
  // Relative speedups against the full-attention row at the same length.
  for (auto& row : report.rows) {
    if (row.steps_per_sec <= 0.0 || row.mechanism == "full") continue;
    for (const auto& base : report.rows)
      if (base.mechanism == "full" && base.task == row.task && base.seq_len == row.seq_len &&
          base.steps_per_sec > 0.0)
        row.relative_speedup_vs_full = row.steps_per_sec / base.steps_per_sec;
  }
  return report;
}

inline bool any_failed(const BenchReport& r) {
  for (const auto& row : r.rows)
    if (row.failed) return true;
  return false;
}

// JSON schema the emitted reports validate against (shipped with the CLI).
inline const char* kReportSchema = R"({
  "$schema": "http://json-schema.org/draft-07/schema#",
  "title": "bench-report",
  "type": "object",
  "required": ["rows", "metadata"],
  "properties": {
    "rows": {
      "type": "array",
      "items": {
        "type": "object",
        "required": ["mechanism", "task", "seq_len", "steps_per_sec",
                     "peak_tensor_bytes", "relative_speedup_vs_full",
                     "accuracy", "span", "speed_excluded", "failed", "error"],
        "properties": {
          "mechanism": {"type": "string"},
          "task": {"type": "string"},
          "seq_len": {"type": "integer", "minimum": 1},
          "steps_per_sec": {"type": "number"},
          "peak_tensor_bytes": {"type": "integer"},
          "relative_speedup_vs_full": {"type": "number"},
          "accuracy": {"type": "number"},
          "span": {"type": "number"},
          "speed_excluded": {"type": "boolean"},
          "failed": {"type": "boolean"},
          "error": {"type": "string"}
        }
      }
    },
    "metadata": {
      "type": "object",
      "required": ["seed", "config_hash", "batch_size", "hardware_note",
                   "timestamp", "timing_note"],
      "properties": {
        "seed": {"type": "integer"},
        "config_hash": {"type": "integer"},
        "batch_size": {"type": "integer"},
        "hardware_note": {"type": "string"},
        "timestamp": {"type": "string"},
        "timing_note": {"type": "string"}
      }
    }
  }
})";

}  // namespace arena::bench
