#include "shelfpipe/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "shelfpipe/errors.hpp"
#include "shelfpipe/util.hpp"

using nlohmann::json;

namespace shelfpipe {

LatencyStats latency_stats(std::vector<double> samples_ms) {
  if (samples_ms.empty()) throw InvalidParamsError("latency_stats: empty sample");
  LatencyStats s;
  s.samples = static_cast<int>(samples_ms.size());
  s.mean_ms = std::accumulate(samples_ms.begin(), samples_ms.end(), 0.0) / samples_ms.size();
  std::sort(samples_ms.begin(), samples_ms.end());
  s.min_ms = samples_ms.front();
  s.max_ms = samples_ms.back();
  s.p50_ms = percentile_sorted(samples_ms, 50);
  s.p95_ms = percentile_sorted(samples_ms, 95);
  s.p99_ms = percentile_sorted(samples_ms, 99);
  return s;
}

BenchRow measure(Executor& executor, const BenchConfig& cfg,
                 const std::vector<std::vector<std::uint8_t>>& encoded_images) {
  if (cfg.batch_size < 1 || cfg.timed_iters < 1 || cfg.warmup_iters < 0) {
    throw InvalidParamsError("bad bench config");
  }
  if (encoded_images.empty()) throw InvalidParamsError("bench needs at least one workload image");

  using clock = std::chrono::steady_clock;
  auto ms_since = [](clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };

  BenchRow row;
  row.batch_size = cfg.batch_size;

  // Fixed pre-decoded batch; decode and letterbox are measured here, outside
  // the timed loop (deployment lesson: preprocessing can dominate if left on
  // the hot path).
  std::vector<Image> decoded;
  std::vector<Image> prepped;
  std::vector<std::pair<int, int>> orig_dims;
  double decode_total = 0, prep_total = 0;
  for (int i = 0; i < cfg.batch_size; ++i) {
    const auto& bytes = encoded_images[i % encoded_images.size()];
    auto t0 = clock::now();
    Image img = decode_ppm(bytes);
    decode_total += ms_since(t0);
    orig_dims.emplace_back(img.width, img.height);

    t0 = clock::now();
    Image canvas = letterbox_image(img, letterbox(img.width, img.height, cfg.input_size));
    prep_total += ms_since(t0);
    decoded.push_back(std::move(img));
    prepped.push_back(std::move(canvas));
  }
  row.decode_ms_per_image = decode_total / cfg.batch_size;
  row.prep_ms_per_image = prep_total / cfg.batch_size;

  std::vector<InferInput> batch;
  for (int i = 0; i < cfg.batch_size; ++i) {
    batch.push_back({"bench_" + std::to_string(i), orig_dims[i].first, orig_dims[i].second,
                     &prepped[i]});
  }

  try {
    for (int i = 0; i < cfg.warmup_iters; ++i) {
      executor.infer(batch);
    }
    std::vector<double> samples;
    samples.reserve(cfg.timed_iters);
    auto loop_start = clock::now();
    for (int i = 0; i < cfg.timed_iters; ++i) {
      auto t0 = clock::now();
      executor.infer(batch);
      samples.push_back(ms_since(t0));
    }
    double total_s = std::chrono::duration<double>(clock::now() - loop_start).count();
    row.latency = latency_stats(std::move(samples));
    row.throughput_ips = cfg.batch_size * cfg.timed_iters / total_s;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw ExecutorError(std::string("executor failed during measurement: ") + e.what());
  }
  return row;
}

namespace {

json profile_to_json(const ExecutorProfile& p) {
  json j = {{"name", p.name},
            {"params_m", p.params_m},
            {"input_size", p.input_size},
            {"precision", to_string(p.precision)}};
  if (p.declared_cost) {
    j["declared_cost"] = {{"base_ms", p.declared_cost->base_ms},
                          {"per_image_ms", p.declared_cost->per_image_ms}};
  }
  return j;
}

ExecutorProfile profile_from_json(const json& j) {
  ExecutorProfile p;
  p.name = j["name"].get<std::string>();
  p.params_m = j["params_m"].get<double>();
  p.input_size = j["input_size"].get<int>();
  p.precision = precision_from_string(j["precision"].get<std::string>());
  if (j.contains("declared_cost")) {
    p.declared_cost = CostModel{j["declared_cost"]["base_ms"].get<double>(),
                                j["declared_cost"]["per_image_ms"].get<double>()};
  }
  return p;
}

}  // namespace

std::string bench_report_json(const BenchReport& r) {
  json rows = json::array();
  for (const BenchRow& row : r.rows) {
    rows.push_back({{"batch_size", row.batch_size},
                    {"latency",
                     {{"mean_ms", row.latency.mean_ms},
                      {"p50_ms", row.latency.p50_ms},
                      {"p95_ms", row.latency.p95_ms},
                      {"p99_ms", row.latency.p99_ms},
                      {"min_ms", row.latency.min_ms},
                      {"max_ms", row.latency.max_ms},
                      {"samples", row.latency.samples}}},
                    {"throughput_ips", row.throughput_ips},
                    {"decode_ms_per_image", row.decode_ms_per_image},
                    {"prep_ms_per_image", row.prep_ms_per_image}});
  }
  json j = {{"executor", profile_to_json(r.executor)}, {"rows", rows}};
  if (r.baseline_name) j["baseline"] = *r.baseline_name;
  return j.dump(2) + "\n";
}

BenchReport bench_report_from_json(const std::string& text) {
  json j = json::parse(text);
  BenchReport r;
  r.executor = profile_from_json(j["executor"]);
  if (j.contains("baseline")) r.baseline_name = j["baseline"].get<std::string>();
  for (const json& jr : j["rows"]) {
    BenchRow row;
    row.batch_size = jr["batch_size"].get<int>();
    const json& lat = jr["latency"];
    row.latency = {lat["mean_ms"].get<double>(), lat["p50_ms"].get<double>(),
                   lat["p95_ms"].get<double>(), lat["p99_ms"].get<double>(),
                   lat["min_ms"].get<double>(), lat["max_ms"].get<double>(),
                   lat["samples"].get<int>()};
    row.throughput_ips = jr["throughput_ips"].get<double>();
    row.decode_ms_per_image = jr["decode_ms_per_image"].get<double>();
    row.prep_ms_per_image = jr["prep_ms_per_image"].get<double>();
    r.rows.push_back(row);
  }
  return r;
}

double speedup_ratio(double value, double baseline) {
  if (baseline <= 0) throw InvalidParamsError("speedup baseline must be positive");
  return value / baseline;
}

std::string format_ratio(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1fx", ratio);
  return buf;
}

namespace {

struct TableEntry {
  std::string name;
  double lat_ms = 0;  // batch-size-1 row (smallest available)
  double tp_ips = 0;  // largest-batch row
};

std::vector<TableEntry> table_entries(const std::vector<BenchReport>& reports) {
  std::vector<TableEntry> entries;
  for (const BenchReport& r : reports) {
    if (r.rows.empty()) throw InvalidParamsError("report without rows: " + r.executor.name);
    const BenchRow* lat_row = &r.rows.front();
    const BenchRow* tp_row = &r.rows.front();
    for (const BenchRow& row : r.rows) {
      if (row.batch_size < lat_row->batch_size) lat_row = &row;
      if (row.batch_size > tp_row->batch_size) tp_row = &row;
    }
    entries.push_back({r.executor.name, lat_row->latency.mean_ms, tp_row->throughput_ips});
  }
  return entries;
}

const TableEntry& find_baseline(const std::vector<TableEntry>& entries, const std::string& name) {
  for (const TableEntry& e : entries) {
    if (e.name == name) return e;
  }
  throw MissingBaselineError(name);
}

}  // namespace

std::string speedup_table_text(const std::vector<BenchReport>& reports,
                               const std::string& baseline) {
  auto entries = table_entries(reports);
  const TableEntry& base = find_baseline(entries, baseline);
  std::size_t name_w = 8;
  for (const auto& e : entries) name_w = std::max(name_w, e.name.size());

  char line[256];
  std::string out;
  std::snprintf(line, sizeof line, "%-*s  %12s  %10s  %14s  %10s\n", static_cast<int>(name_w),
                "executor", "lat_ms", "lat_vs_base", "tp_img_per_s", "tp_vs_base");
  out += line;
  for (const auto& e : entries) {
    std::snprintf(line, sizeof line, "%-*s  %12.2f  %9s%c  %14.2f  %9s%c\n",
                  static_cast<int>(name_w), e.name.c_str(), e.lat_ms,
                  format_ratio(speedup_ratio(e.lat_ms, base.lat_ms)).c_str(), ' ', e.tp_ips,
                  format_ratio(speedup_ratio(e.tp_ips, base.tp_ips)).c_str(), ' ');
    out += line;
  }
  return out;
}

std::string speedup_table_csv(const std::vector<BenchReport>& reports,
                              const std::string& baseline) {
  auto entries = table_entries(reports);
  const TableEntry& base = find_baseline(entries, baseline);
  std::string out = "executor,lat_ms,lat_vs_base,tp_img_per_s,tp_vs_base\n";
  for (const auto& e : entries) {
    out += e.name + ',' + fmt_double(e.lat_ms) + ',' +
           format_ratio(speedup_ratio(e.lat_ms, base.lat_ms)) + ',' + fmt_double(e.tp_ips) + ',' +
           format_ratio(speedup_ratio(e.tp_ips, base.tp_ips)) + '\n';
  }
  return out;
}

}  // namespace shelfpipe
