// Command-line surface: dataset generation (list-operation expressions,
// dashed-contour connectivity images), CIFAR-10 ingestion, training,
// evaluation, throughput/peak-memory benchmarking, span analysis, and report
// conversion. Every subcommand takes --config <json> where applicable plus
// flag overrides, honors --seed (falling back to the ARENA_SEED environment
// variable), and emits single-line JSON errors on stderr under --json-errors.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "arena/bench/bench.hpp"
#include "arena/data/ingest.hpp"
#include "arena/metrics/metrics.hpp"
#include "arena/model/checkpoint.hpp"
#include "arena/model/encoder.hpp"
#include "arena/model/train.hpp"
#include "arena/tasks/listops.hpp"
#include "arena/tasks/pathfinder.hpp"

namespace {

using nlohmann::json;

std::uint64_t resolve_seed(std::uint64_t flag_seed, bool seed_set) {
  if (seed_set) return flag_seed;
  if (const char* env = std::getenv("ARENA_SEED")) return std::strtoull(env, nullptr, 10);
  return 0;
}

json load_json(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw arena::IoError("cannot read config " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw arena::ParseError("config " + path + ": " + e.what());
  }
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw arena::IoError("cannot write " + path);
  f << text;
}

// Dataset file -> examples with the model's token-id scheme. ListOps files
// are `tokens<TAB>label` text; pixel files are the binary record format.
arena::model::Dataset load_dataset(const std::string& path, int max_tokens) {
  arena::model::Dataset data;
  if (path.size() > 4 && path.substr(path.size() - 4) == ".bin") {
    for (const auto& s : arena::tasks::read_pixel_records(path)) {
      arena::model::Example ex;
      ex.tokens = s.pixels.tokens;
      if (static_cast<int>(ex.tokens.size()) > max_tokens) ex.tokens.resize(max_tokens);
      ex.label = s.label;
      data.push_back(std::move(ex));
    }
  } else {
    for (const auto& s : arena::tasks::read_listops(path)) {
      arena::model::Example ex;
      ex.tokens = arena::tasks::listops_token_ids(s.tokens);
      if (static_cast<int>(ex.tokens.size()) > max_tokens) ex.tokens.resize(max_tokens);
      ex.label = s.label;
      data.push_back(std::move(ex));
    }
  }
  if (data.empty()) throw arena::IoError("dataset " + path + " is empty");
  return data;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"long-sequence attention benchmark toolkit"};
  app.require_subcommand(1);
  bool json_errors = false;
  app.add_flag("--json-errors", json_errors, "emit errors as single-line JSON on stderr");

  std::uint64_t seed = 0;
  bool seed_set = false;

  // ---- gen-listops ----
  auto* gl = app.add_subcommand("gen-listops", "generate list-operation expressions");
  int gl_n = 1000, gl_max_len = 2000, gl_max_depth = 10;
  std::string gl_out = "listops.tsv";
  gl->add_option("--n", gl_n, "sample count");
  gl->add_option("--max-len", gl_max_len, "serialized token budget");
  gl->add_option("--max-depth", gl_max_depth, "max nesting depth");
  gl->add_option("--out", gl_out, "output file (tokens<TAB>label per line)");
  gl->add_option("--seed", seed, "rng seed")->each([&](const std::string&) { seed_set = true; });

  // ---- gen-pathfinder ----
  auto* gp = app.add_subcommand("gen-pathfinder", "generate dashed-contour connectivity images");
  int gp_n = 1000, gp_size = 32, gp_distractors = 2;
  std::string gp_out = "pathfinder.bin";
  gp->add_option("--n", gp_n, "sample count");
  gp->add_option("--size", gp_size, "image side (32 or 128)");
  gp->add_option("--distractors", gp_distractors, "distractor contours");
  gp->add_option("--out", gp_out, "output file (binary records; JSON sidecar written beside)");
  gp->add_option("--seed", seed, "rng seed")->each([&](const std::string&) { seed_set = true; });

  // ---- ingest-cifar ----
  auto* ic = app.add_subcommand("ingest-cifar", "convert a CIFAR-10 binary batch to grayscale pixel records");
  std::string ic_in, ic_out = "cifar.bin";
  ic->add_option("--in", ic_in, "CIFAR-10 binary batch file")->required();
  ic->add_option("--out", ic_out, "output pixel-record file");

  // ---- train ----
  auto* tr = app.add_subcommand("train", "train an encoder on a dataset file");
  std::string tr_config, tr_data, tr_out = "model.ckpt", tr_history;
  tr->add_option("--config", tr_config, "JSON with {encoder, train} sections")->required();
  tr->add_option("--data", tr_data, "dataset file")->required();
  tr->add_option("--out", tr_out, "checkpoint output path");
  tr->add_option("--history", tr_history, "optional JSON loss-curve output");
  tr->add_option("--seed", seed, "rng seed")->each([&](const std::string&) { seed_set = true; });

  // ---- eval ----
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset file");
  std::string ev_ckpt, ev_data;
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint path")->required();
  ev->add_option("--data", ev_data, "dataset file")->required();

  // ---- bench ----
  auto* be = app.add_subcommand("bench", "throughput / peak-memory sweep");
  std::string be_config, be_out = ".";
  be->add_option("--config", be_config, "suite config JSON")->required();
  be->add_option("--out", be_out, "output directory");
  be->add_option("--seed", seed, "rng seed")->each([&](const std::string&) { seed_set = true; });

  // ---- span ----
  auto* sp = app.add_subcommand("span", "attention-span report for a checkpoint");
  std::string sp_ckpt, sp_data;
  int sp_samples = 1000;
  bool sp_exclude_cls = false;
  sp->add_option("--checkpoint", sp_ckpt, "checkpoint path")->required();
  sp->add_option("--data", sp_data, "dataset file")->required();
  sp->add_option("--samples", sp_samples, "samples to average over");
  sp->add_flag("--exclude-cls", sp_exclude_cls, "drop position 0 and renormalize");

  // ---- report ----
  auto* rp = app.add_subcommand("report", "convert a report JSON to CSV");
  std::string rp_in, rp_out = "report.csv";
  rp->add_option("--in", rp_in, "report JSON path")->required();
  rp->add_option("--out", rp_out, "CSV output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    std::uint64_t s = resolve_seed(seed, seed_set);
    if (gl->parsed()) {
      arena::Rng rng(s);
      auto samples = arena::tasks::gen_listops(rng, gl_max_len, gl_max_depth, gl_n);
      arena::tasks::write_listops(gl_out, samples);
      std::cout << "wrote " << samples.size() << " samples to " << gl_out << "\n";
    } else if (gp->parsed()) {
      arena::Rng rng(s);
      auto samples = arena::tasks::gen_pathfinder(rng, gp_size, gp_n, gp_distractors);
      json sidecar = {{"generator", "pathfinder"}, {"size", gp_size}, {"n", gp_n},
                      {"distractors", gp_distractors}, {"seed", s},
                      {"dash_len", 3.0}, {"gap", 2.0},
                      {"marker_radius", gp_size == 128 ? 4.0 : 1.0},
                      {"grayscale", "Rec.601 (0.299, 0.587, 0.114)"}};
      arena::tasks::write_pixel_records(gp_out, samples, sidecar);
      std::cout << "wrote " << samples.size() << " records to " << gp_out << "\n";
    } else if (ic->parsed()) {
      auto records = arena::data::parse_cifar10(ic_in);
      std::vector<arena::tasks::PixelSample> out;
      out.reserve(records.size());
      for (const auto& r : records) out.push_back({arena::data::to_grayscale(r), r.label});
      json sidecar = {{"generator", "cifar10-grayscale"}, {"source", ic_in},
                      {"grayscale", "Rec.601 (0.299, 0.587, 0.114)"},
                      {"split_note", "standard CIFAR-10 batch files assumed"}};
      arena::tasks::write_pixel_records(ic_out, out, sidecar);
      std::cout << "wrote " << out.size() << " records to " << ic_out << "\n";
    } else if (tr->parsed()) {
      json cfg_json = load_json(tr_config);
      arena::model::EncoderConfig cfg = cfg_json.at("encoder").get<arena::model::EncoderConfig>();
      arena::model::TrainConfig tc = cfg_json.at("train").get<arena::model::TrainConfig>();
      if (seed_set || std::getenv("ARENA_SEED")) tc.seed = s;
      arena::model::Dataset data = load_dataset(tr_data, cfg.max_len - 1);
      arena::Rng init(tc.seed);
      arena::model::ModelParams params = arena::model::build_encoder(cfg, init);
      arena::model::TrainHistory hist = arena::model::train(params, cfg, tc, data);
      arena::model::save_checkpoint(tr_out, cfg, params);
      if (!tr_history.empty()) {
        json h = json::array();
        for (const auto& rec : hist.steps)
          h.push_back({{"step", rec.step}, {"loss", rec.loss}, {"lr", rec.lr}});
        write_text(tr_history, json{{"steps", h}}.dump(2) + "\n");
      }
      std::cout << "final loss " << hist.steps.back().loss << ", checkpoint " << tr_out << "\n";
    } else if (ev->parsed()) {
      auto [cfg, params] = arena::model::load_checkpoint(ev_ckpt);
      arena::model::Dataset data = load_dataset(ev_data, cfg.max_len - 1);
      float acc = arena::model::eval_accuracy(params, cfg, data);
      std::cout << json{{"accuracy", acc}, {"samples", data.size()}}.dump() << "\n";
    } else if (be->parsed()) {
      arena::bench::SuiteConfig sc = load_json(be_config).get<arena::bench::SuiteConfig>();
      if (seed_set || std::getenv("ARENA_SEED")) sc.seed = s;
      arena::bench::BenchReport report = arena::bench::run_suite(sc);
      std::filesystem::create_directories(be_out);
      write_text(be_out + "/report.json", json(report).dump(2) + "\n");
      arena::bench::write_csv(be_out + "/report.csv", report);
      write_text(be_out + "/report.schema.json", std::string(arena::bench::kReportSchema) + "\n");
      std::cout << "wrote report.json and report.csv under " << be_out << "\n";
      if (arena::bench::any_failed(report)) return 1;
    } else if (sp->parsed()) {
      auto [cfg, params] = arena::model::load_checkpoint(sp_ckpt);
      arena::model::Dataset data = load_dataset(sp_data, cfg.max_len - 1);
      arena::metrics::SpanReport r =
          arena::metrics::required_span(params, cfg, data, sp_samples, sp_exclude_cls);
      std::cout << json{{"required_attention_span", r}}.dump(2) << "\n";
    } else if (rp->parsed()) {
      json j = load_json(rp_in);
      arena::bench::BenchReport report;
      report.seed = j.at("metadata").at("seed").get<std::uint64_t>();
      for (const auto& row : j.at("rows")) {
        arena::bench::BenchRow r;
        r.mechanism = row.at("mechanism").get<std::string>();
        r.task = row.at("task").get<std::string>();
        r.seq_len = row.at("seq_len").get<int>();
        r.steps_per_sec = row.at("steps_per_sec").get<double>();
        r.peak_tensor_bytes = row.at("peak_tensor_bytes").get<std::int64_t>();
        r.relative_speedup_vs_full = row.at("relative_speedup_vs_full").get<double>();
        r.accuracy = row.at("accuracy").get<double>();
        r.span = row.at("span").get<double>();
        r.speed_excluded = row.at("speed_excluded").get<bool>();
        r.failed = row.at("failed").get<bool>();
        report.rows.push_back(std::move(r));
      }
      arena::bench::write_csv(rp_out, report);
      std::cout << "wrote " << rp_out << "\n";
    }
    return 0;
  } catch (const arena::Error& e) {
    if (json_errors)
      std::cerr << json{{"error", e.what()}}.dump() << "\n";
    else
      std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const json::exception& e) {
    if (json_errors)
      std::cerr << json{{"error", e.what()}}.dump() << "\n";
    else
      std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
