#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "shelfpipe/bench.hpp"
#include "shelfpipe/broker.hpp"
#include "shelfpipe/dataset.hpp"
#include "shelfpipe/detector.hpp"
#include "shelfpipe/errors.hpp"
#include "shelfpipe/eval.hpp"
#include "shelfpipe/log.hpp"
#include "shelfpipe/serve.hpp"
#include "shelfpipe/synthgen.hpp"
#include "shelfpipe/util.hpp"

using nlohmann::json;
using namespace shelfpipe;

namespace {

std::atomic<bool> g_interrupted{false};

void handle_sigint(int) { g_interrupted = true; }

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::fputs(text.c_str(), stdout);
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Rgb parse_rgb(const std::string& spec) {
  auto parts = split_on(spec, ',');
  if (parts.size() != 3) throw InvalidParamsError("color must be r,g,b: " + spec);
  auto chan = [](const std::string& s) {
    int v = std::stoi(s);
    if (v < 0 || v > 255) throw InvalidParamsError("color channel out of range: " + s);
    return static_cast<std::uint8_t>(v);
  };
  return {chan(parts[0]), chan(parts[1]), chan(parts[2])};
}

std::array<int, 3> parse_splits(const std::string& spec) {
  auto parts = split_on(spec, ',');
  if (parts.size() != 3) throw InvalidParamsError("splits must be train,val,test: " + spec);
  return {std::stoi(parts[0]), std::stoi(parts[1]), std::stoi(parts[2])};
}

std::array<int, 3> default_splits(int n) {
  int train = n * 8 / 10;
  int val = n / 10;
  return {train, val, n - train - val};
}

// Flags shared by predict/bench/serve for picking a reference executor.
struct ExecutorFlags {
  std::string kind = "oracle";  // oracle | color | sim
  std::string name;
  int input_size = 640;
  double params_m = 0;
  std::string precision = "fp32";
  // oracle noise
  NoiseParams noise;
  // color
  std::string empty_color = "18,18,18";
  int tol = 0;
  // sim
  double base_ms = 10;
  double per_image_ms = 0;
  std::string data;  // dataset manifest for the oracle's gt

  void add_to(CLI::App* cmd, bool with_data) {
    cmd->add_option("--executor", kind, "Executor kind: oracle, color or sim")
        ->check(CLI::IsMember({"oracle", "color", "sim"}));
    cmd->add_option("--executor-name", name, "Report name for the executor");
    cmd->add_option("--input-size", input_size, "Square model input side in pixels");
    cmd->add_option("--params-m", params_m, "Parameter count metadata, millions");
    cmd->add_option("--precision", precision, "Profile metadata: fp32 or fp16")
        ->check(CLI::IsMember({"fp32", "fp16"}));
    cmd->add_option("--jitter-sigma", noise.jitter_sigma, "Oracle: corner jitter sigma, px");
    cmd->add_option("--drop-prob", noise.drop_prob, "Oracle: per-box drop probability");
    cmd->add_option("--fp-rate", noise.fp_rate, "Oracle: expected false positives per image");
    cmd->add_option("--tp-mean", noise.tp_mean, "Oracle: true-positive score mean");
    cmd->add_option("--tp-sd", noise.tp_sd, "Oracle: true-positive score stddev");
    cmd->add_option("--fp-mean", noise.fp_mean, "Oracle: false-positive score mean");
    cmd->add_option("--fp-sd", noise.fp_sd, "Oracle: false-positive score stddev");
    cmd->add_option("--noise-seed", noise.seed, "Oracle: noise stream seed");
    cmd->add_option("--empty-color", empty_color, "Color executor: empty backboard r,g,b");
    cmd->add_option("--tol", tol, "Color executor: per-channel tolerance");
    cmd->add_option("--base-ms", base_ms, "Simulated executor: per-call base cost");
    cmd->add_option("--per-image-ms", per_image_ms, "Simulated executor: per-image cost");
    if (with_data) {
      cmd->add_option("--data", data, "Dataset manifest (required by the oracle executor)");
    }
  }

  std::unique_ptr<Executor> build(const Dataset* dataset) const {
    ExecutorProfile profile;
    profile.name = name.empty() ? kind : name;
    profile.params_m = params_m;
    profile.input_size = input_size;
    profile.precision = precision_from_string(precision);
    if (kind == "oracle") {
      if (dataset == nullptr) throw InvalidParamsError("oracle executor needs --data");
      return std::make_unique<OracleExecutor>(profile, build_gt_index(*dataset), noise);
    }
    if (kind == "color") {
      return std::make_unique<ColorThresholdExecutor>(profile, parse_rgb(empty_color), tol);
    }
    profile.declared_cost = CostModel{base_ms, per_image_ms};
    return std::make_unique<SimulatedExecutor>(profile);
  }
};

int cmd_generate(const SceneParams& params, int n, const std::string& splits_spec,
                 const std::string& out_dir, const std::string& name, bool serial) {
  auto splits = splits_spec.empty() ? default_splits(n) : parse_splits(splits_spec);
  Dataset d = generate_dataset(params, n, splits, out_dir, name,
                               serial ? ExecPolicy::serial : ExecPolicy::parallel);
  auto counts = d.split_counts();
  std::printf("wrote %zu images to %s (train/val/test = %d/%d/%d)\n", d.images.size(),
              out_dir.c_str(), counts[0], counts[1], counts[2]);
  return 0;
}

int cmd_lint(const std::string& data, const LintConfig& cfg, const std::string& out,
             bool as_json) {
  Dataset d = load_dataset(data);
  LintReport report = lint(d, cfg);
  std::string text;
  if (as_json) {
    json findings = json::array();
    for (const LintFinding& f : report.findings) {
      findings.push_back({{"image_id", f.image_id},
                          {"rule", f.rule_id},
                          {"severity", f.severity == Severity::error ? "error" : "warning"},
                          {"box_index", f.box_index},
                          {"message", f.message}});
    }
    text = json{{"findings", findings}}.dump(2) + "\n";
  } else {
    for (const LintFinding& f : report.findings) {
      text += f.severity == Severity::error ? "error   " : "warning ";
      text += f.rule_id + " " + (f.image_id.empty() ? "<dataset>" : f.image_id);
      if (f.box_index >= 0) text += "#" + std::to_string(f.box_index);
      text += ": " + f.message + "\n";
    }
    text += std::to_string(report.findings.size()) + " finding(s)\n";
  }
  write_text(out, text);
  return 0;
}

int cmd_stats(const std::string& data, const std::string& out_dir) {
  Dataset d = load_dataset(data);
  StatsReport s = compute_stats(d);
  write_stats_csv(s, out_dir);
  std::printf("%zu images, %zu boxes; counts.csv sizes.csv centers.csv written to %s\n",
              d.images.size(), s.size_points.size(), out_dir.c_str());
  return 0;
}

int cmd_predict(const std::string& data, const std::string& split_name,
                const ExecutorFlags& exec_flags, const std::string& out) {
  Dataset d = load_dataset(data);
  std::optional<Split> split;
  if (split_name != "all") split = split_from_string(split_name);
  auto executor = exec_flags.build(&d);

  std::filesystem::path base = std::filesystem::path(data).parent_path();
  PipelineConfig cfg;  // default nms thresholds
  PredictionSet preds;
  for (const ImageRecord& rec : d.images) {
    if (split && rec.split != *split) continue;
    LetterboxTransform t = letterbox(rec.width, rec.height, executor->profile().input_size);
    Image boxed;
    InferInput in{rec.id, rec.width, rec.height, nullptr};
    if (exec_flags.kind == "color") {
      boxed = letterbox_image(read_ppm(base / rec.file), t);
      in.pixels = &boxed;
    }
    auto raw = executor->infer(std::span<const InferInput>(&in, 1));
    PredictedImage p;
    p.image_id = rec.id;
    for (const Detection& det : nms(raw.at(0), cfg.iou_thr, cfg.score_thr, kMaxDets)) {
      BBox b = t.unmap(det.box);
      if (clamp_to_image(b, rec.width, rec.height)) p.boxes.push_back({b, det.score});
    }
    preds.push_back(std::move(p));
  }
  save_predictions_jsonl(preds, out);
  std::printf("wrote predictions for %zu images to %s\n", preds.size(), out.c_str());
  return 0;
}

int cmd_evaluate(const std::string& preds_path, const std::string& data,
                 const std::string& split_name, const std::string& out, bool serial) {
  Dataset d = load_dataset(data);
  PredictionSet preds = load_predictions_jsonl(preds_path);
  std::optional<Split> split;
  if (split_name != "all") split = split_from_string(split_name);
  EvalReport report =
      evaluate(preds, d, split, serial ? ExecPolicy::serial : ExecPolicy::parallel);
  write_text(out, eval_report_json(report));
  if (!out.empty() && out != "-") {
    std::printf("mAP %.1f  mAR %.1f  mAF %.1f  (%d images, %d gt)\n", report.map, report.mar,
                report.maf, report.n_images, report.n_gt);
  }
  return 0;
}

int cmd_curve(const std::vector<std::string>& entries, const std::string& out) {
  std::vector<CurvePoint> points;
  for (const std::string& e : entries) {
    auto parts = split_on(e, ':');
    if (parts.size() != 3) {
      throw InvalidParamsError("curve entry must be model:train_size:report.json, got " + e);
    }
    EvalReport r = eval_report_from_json(read_text(parts[2]));
    points.push_back({parts[0], std::stoi(parts[1]), r.map, r.mar, r.maf});
  }
  write_text(out, curve_csv(curve_aggregate(std::move(points))));
  return 0;
}

std::vector<std::vector<std::uint8_t>> synthetic_workload(int count, int img_w, int img_h,
                                                          std::uint64_t seed) {
  SceneParams p;
  p.img_w = img_w;
  p.img_h = img_h;
  std::vector<std::vector<std::uint8_t>> encoded;
  for (int i = 0; i < count; ++i) {
    p.seed = seed ^ static_cast<std::uint64_t>(i);
    encoded.push_back(encode_ppm(generate(p).image));
  }
  return encoded;
}

int cmd_bench_measure(const ExecutorFlags& exec_flags, std::vector<int> batch_sizes, int warmup,
                      int iters, int workload_n, const std::string& data,
                      const std::string& baseline, const std::string& out) {
  std::optional<Dataset> dataset;
  std::vector<std::vector<std::uint8_t>> workload;
  if (!data.empty()) {
    dataset = load_dataset(data);
    std::filesystem::path base = std::filesystem::path(data).parent_path();
    int n = std::min<int>(workload_n, static_cast<int>(dataset->images.size()));
    for (int i = 0; i < n; ++i) {
      workload.push_back(encode_ppm(read_ppm(base / dataset->images[i].file)));
    }
  } else {
    workload = synthetic_workload(workload_n, 640, 480, 7);
  }
  auto executor = exec_flags.build(dataset ? &*dataset : nullptr);

  BenchReport report;
  report.executor = executor->profile();
  if (!baseline.empty()) report.baseline_name = baseline;
  if (batch_sizes.empty()) batch_sizes = {1};
  for (int bs : batch_sizes) {
    BenchConfig cfg{bs, warmup, iters, exec_flags.input_size};
    report.rows.push_back(measure(*executor, cfg, workload));
  }
  write_text(out, bench_report_json(report));
  return 0;
}

int cmd_bench_table(const std::vector<std::string>& report_paths, const std::string& baseline,
                    const std::string& csv_out) {
  std::vector<BenchReport> reports;
  for (const std::string& p : report_paths) {
    reports.push_back(bench_report_from_json(read_text(p)));
  }
  std::string base = baseline;
  if (base.empty()) {
    for (const BenchReport& r : reports) {
      if (r.baseline_name) base = *r.baseline_name;
    }
  }
  if (base.empty()) throw MissingBaselineError("(none given)");
  std::fputs(speedup_table_text(reports, base).c_str(), stdout);
  if (!csv_out.empty()) write_text(csv_out, speedup_table_csv(reports, base));
  return 0;
}

int cmd_serve(const std::string& config_path, std::string broker_addr, ExecutorFlags exec_flags,
              PipelineConfig cfg, bool have_drift, DriftConfig drift) {
  std::optional<DriftConfig> drift_opt;
  if (!config_path.empty()) {
    json j = json::parse(read_text(config_path));
    cfg = pipeline_config_from_json(j.value("pipeline", json::object()));
    if (j.contains("broker")) broker_addr = j["broker"].get<std::string>();
    if (j.contains("executor")) {
      const json& e = j["executor"];
      exec_flags.kind = e.value("kind", exec_flags.kind);
      exec_flags.input_size = e.value("input_size", exec_flags.input_size);
      exec_flags.tol = e.value("tol", exec_flags.tol);
      exec_flags.empty_color = e.value("empty_color", exec_flags.empty_color);
      exec_flags.data = e.value("data", exec_flags.data);
      exec_flags.base_ms = e.value("base_ms", exec_flags.base_ms);
      exec_flags.per_image_ms = e.value("per_image_ms", exec_flags.per_image_ms);
      exec_flags.noise.seed = e.value("noise_seed", exec_flags.noise.seed);
    }
    if (j.contains("drift")) {
      const json& dj = j["drift"];
      drift.window_len = dj.value("window_len", drift.window_len);
      drift.count_ref = dj.value("count_ref", drift.count_ref);
      drift.count_thr = dj.value("count_thr", drift.count_thr);
      have_drift = true;
    }
  }
  if (broker_addr.empty()) throw InvalidParamsError("serve needs --broker or a config file");
  if (have_drift) drift_opt = drift;

  std::optional<Dataset> dataset;
  if (!exec_flags.data.empty()) dataset = load_dataset(exec_flags.data);
  auto executor = exec_flags.build(dataset ? &*dataset : nullptr);

  Service service(cfg, std::move(executor), broker_addr, drift_opt);
  service.start();
  std::printf("serving: broker %s, in '%s' -> out '%s' (SIGINT stops)\n", broker_addr.c_str(),
              cfg.topics.in.c_str(), cfg.topics.out.c_str());
  std::signal(SIGINT, handle_sigint);
  std::signal(SIGTERM, handle_sigint);
  while (!g_interrupted) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  service.stop();
  auto s = service.stats_snapshot();
  std::printf("processed %llu, errors %llu, dropped %llu\n",
              static_cast<unsigned long long>(s.processed),
              static_cast<unsigned long long>(s.errors),
              static_cast<unsigned long long>(s.dropped));
  return 0;
}

int cmd_broker(const std::string& listen) {
  BrokerSim broker(listen);
  std::printf("broker listening on %s (SIGINT stops)\n", broker.addr().c_str());
  std::signal(SIGINT, handle_sigint);
  std::signal(SIGTERM, handle_sigint);
  while (!g_interrupted) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  broker.stop();
  std::printf("published %llu, delivered %llu, dropped %llu\n",
              static_cast<unsigned long long>(broker.published()),
              static_cast<unsigned long long>(broker.delivered()),
              static_cast<unsigned long long>(broker.dropped()));
  return 0;
}

// Reference out-of-process executor speaking the subprocess adapter schema:
// reads request lines on stdin, answers with color-threshold detections.
int cmd_exec_color(const std::string& empty_color_spec, int tol) {
  Rgb empty_color = parse_rgb(empty_color_spec);
  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    json req = json::parse(line);
    json dets = json::array();
    std::string pixels_b64 = req.value("pixels", "");
    if (!pixels_b64.empty()) {
      Image img = decode_ppm(base64_decode(pixels_b64));
      for (const Detection& d : color_threshold_detect(img, empty_color, tol)) {
        dets.push_back({{"x", d.box.x},
                        {"y", d.box.y},
                        {"w", d.box.w},
                        {"h", d.box.h},
                        {"score", d.score}});
      }
    }
    json resp = {{"image_id", req.at("image_id")}, {"detections", dets}};
    std::fputs((resp.dump() + "\n").c_str(), stdout);
    std::fflush(stdout);
  }
  return 0;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"shelfpipe: empty-shelf detection pipeline tools"};
  app.require_subcommand(1);

  // generate
  SceneParams gen_params;
  int gen_n = 10;
  std::string gen_splits, gen_out, gen_name = "synthetic";
  bool gen_serial = false;
  auto* gen = app.add_subcommand("generate", "Generate a synthetic shelf dataset");
  gen->add_option("--out", gen_out, "Output dataset directory")->required();
  gen->add_option("--n", gen_n, "Number of images");
  gen->add_option("--splits", gen_splits, "train,val,test counts (default 80/10/10)");
  gen->add_option("--seed", gen_params.seed, "Base RNG seed");
  gen->add_option("--img-w", gen_params.img_w, "Image width");
  gen->add_option("--img-h", gen_params.img_h, "Image height");
  gen->add_option("--rows", gen_params.rows, "Shelf rows");
  gen->add_option("--slots", gen_params.slots_per_row, "Slots per row");
  gen->add_option("--empty-prob", gen_params.empty_prob, "Probability a slot is empty");
  gen->add_option("--product-w-min", gen_params.product_w_min, "Min raw slot width, px");
  gen->add_option("--product-w-max", gen_params.product_w_max, "Max raw slot width, px");
  gen->add_option("--name", gen_name, "Dataset name");
  gen->add_flag("--serial", gen_serial, "Disable the parallel per-image loop");

  // lint
  std::string lint_data, lint_out = "-", lint_expect;
  LintConfig lint_cfg;
  bool lint_json = false;
  auto* lnt = app.add_subcommand("lint", "Check a dataset against the annotation rules");
  lnt->add_option("--data", lint_data, "dataset.json manifest")->required();
  lnt->add_option("--min-px", lint_cfg.min_px, "L2: minimum box side in pixels");
  lnt->add_option("--merge-gap-frac", lint_cfg.merge_gap_frac, "L3: gap fraction threshold");
  lnt->add_option("--dup-iou", lint_cfg.dup_iou, "L4: duplicate IoU threshold");
  lnt->add_option("--max-count", lint_cfg.max_count, "L5: max boxes per image");
  lnt->add_option("--expect-splits", lint_expect, "L6: expected train,val,test counts");
  lnt->add_option("--out", lint_out, "Report path ('-' for stdout)");
  lnt->add_flag("--json", lint_json, "Emit the report as JSON");

  // stats
  std::string stats_data, stats_dir = ".";
  auto* sts = app.add_subcommand("stats", "Dataset distribution statistics as CSV");
  sts->add_option("--data", stats_data, "dataset.json manifest")->required();
  sts->add_option("--out-dir", stats_dir, "Directory for the CSV files");

  // predict
  std::string pred_data, pred_split = "all", pred_out;
  ExecutorFlags pred_exec;
  auto* prd = app.add_subcommand("predict", "Run a reference executor over a dataset split");
  prd->add_option("--data", pred_data, "dataset.json manifest")->required();
  prd->add_option("--split", pred_split, "train, val, test or all");
  prd->add_option("--out", pred_out, "Predictions JSONL path")->required();
  pred_exec.add_to(prd, false);

  // evaluate
  std::string eval_preds, eval_data, eval_split = "all", eval_out = "-";
  bool eval_serial = false;
  auto* evl = app.add_subcommand("evaluate", "Score predictions against ground truth");
  evl->add_option("--preds", eval_preds, "Predictions JSONL")->required();
  evl->add_option("--data", eval_data, "dataset.json manifest")->required();
  evl->add_option("--split", eval_split, "train, val, test or all");
  evl->add_option("--out", eval_out, "Report JSON path ('-' for stdout)");
  evl->add_flag("--serial", eval_serial, "Disable the parallel matching loop");

  // curve
  std::vector<std::string> curve_entries;
  std::string curve_out = "-";
  auto* crv = app.add_subcommand("curve", "Aggregate eval reports into a learning-curve CSV");
  crv->add_option("--entry", curve_entries, "model:train_size:report.json (repeatable)")
      ->required();
  crv->add_option("--out", curve_out, "CSV path ('-' for stdout)");

  // bench
  ExecutorFlags bench_exec;
  bench_exec.kind = "sim";
  std::vector<int> bench_batches;
  int bench_warmup = 10, bench_iters = 100, bench_workload = 8;
  std::string bench_data, bench_baseline, bench_out = "-", bench_csv;
  std::vector<std::string> bench_reports;
  auto* bch = app.add_subcommand("bench", "Measure latency/throughput or format a speedup table");
  bch->add_option("--batch-size", bench_batches, "Batch sizes to measure (repeatable)");
  bch->add_option("--warmup", bench_warmup, "Warmup iterations");
  bch->add_option("--iters", bench_iters, "Timed iterations");
  bch->add_option("--workload", bench_workload, "Synthetic workload image count");
  bch->add_option("--baseline", bench_baseline, "Baseline executor name");
  bch->add_option("--out", bench_out, "Report JSON path ('-' for stdout)");
  bch->add_option("--reports", bench_reports, "Table mode: report JSON files to compare");
  bch->add_option("--csv", bench_csv, "Table mode: also write CSV here");
  bench_exec.add_to(bch, true);

  // serve
  std::string serve_config, serve_broker;
  PipelineConfig serve_cfg;
  ExecutorFlags serve_exec;
  serve_exec.kind = "color";
  DriftConfig serve_drift;
  bool serve_have_drift = false;
  auto* srv = app.add_subcommand("serve", "Run the streaming inference service");
  srv->add_option("--config", serve_config, "Service config JSON");
  srv->add_option("--broker", serve_broker, "Broker address host:port");
  srv->add_option("--batch-size", serve_cfg.batch_size, "Inference batch size");
  srv->add_option("--batch-timeout-ms", serve_cfg.batch_timeout_ms, "Batch forming timeout");
  srv->add_option("--decode-parallelism", serve_cfg.decode_parallelism, "Decode pool size");
  srv->add_option("--score-thr", serve_cfg.score_thr, "NMS score threshold");
  srv->add_option("--iou-thr", serve_cfg.iou_thr, "NMS IoU threshold");
  srv->add_option("--topic-in", serve_cfg.topics.in, "Input topic");
  srv->add_option("--topic-out", serve_cfg.topics.out, "Output topic");
  srv->add_option("--topic-stats", serve_cfg.topics.stats, "Stats topic");
  srv->add_option("--stats-period-ms", serve_cfg.stats_period_ms, "Stats cadence");
  srv->add_option("--drift-window", serve_drift.window_len, "Drift window length");
  srv->add_option("--drift-count-ref", serve_drift.count_ref, "Drift reference mean count");
  auto* drift_thr_opt =
      srv->add_option("--drift-count-thr", serve_drift.count_thr, "Drift alert threshold");
  serve_exec.add_to(srv, true);

  // broker
  std::string broker_listen = "127.0.0.1:7171";
  auto* brk = app.add_subcommand("broker", "Run the pub/sub broker simulator");
  brk->add_option("--listen", broker_listen, "Listen address host:port");

  // exec-color: reference child process for the subprocess executor adapter
  std::string execc_color = "18,18,18";
  int execc_tol = 0;
  auto* exc = app.add_subcommand("exec-color", "Answer executor-adapter requests on stdin");
  exc->add_option("--empty-color", execc_color, "Empty backboard color r,g,b");
  exc->add_option("--tol", execc_tol, "Per-channel tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    std::cerr << app.get_name() << " --help shows usage\n";
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_generate(gen_params, gen_n, gen_splits, gen_out, gen_name, gen_serial);
    if (lnt->parsed()) {
      if (!lint_expect.empty()) lint_cfg.expect_splits = parse_splits(lint_expect);
      return cmd_lint(lint_data, lint_cfg, lint_out, lint_json);
    }
    if (sts->parsed()) return cmd_stats(stats_data, stats_dir);
    if (prd->parsed()) return cmd_predict(pred_data, pred_split, pred_exec, pred_out);
    if (evl->parsed()) return cmd_evaluate(eval_preds, eval_data, eval_split, eval_out, eval_serial);
    if (crv->parsed()) return cmd_curve(curve_entries, curve_out);
    if (bch->parsed()) {
      if (!bench_reports.empty()) return cmd_bench_table(bench_reports, bench_baseline, bench_csv);
      return cmd_bench_measure(bench_exec, bench_batches, bench_warmup, bench_iters,
                               bench_workload, bench_exec.data, bench_baseline, bench_out);
    }
    if (srv->parsed()) {
      serve_have_drift = drift_thr_opt->count() > 0;
      return cmd_serve(serve_config, serve_broker, serve_exec, serve_cfg, serve_have_drift,
                       serve_drift);
    }
    if (brk->parsed()) return cmd_broker(broker_listen);
    if (exc->parsed()) return cmd_exec_color(execc_color, execc_tol);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int main(int argc, char** argv) { return run(argc, argv); }
