#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "shelfpipe/detector.hpp"

namespace shelfpipe {

struct BenchConfig {
  int batch_size = 1;
  int warmup_iters = 10;
  int timed_iters = 100;
  int input_size = 640;
};

struct LatencyStats {
  double mean_ms = 0;
  double p50_ms = 0;
  double p95_ms = 0;
  double p99_ms = 0;
  double min_ms = 0;
  double max_ms = 0;
  int samples = 0;
};

// Nearest-rank percentiles. Throws InvalidParamsError on an empty sample.
LatencyStats latency_stats(std::vector<double> samples_ms);

struct BenchRow {
  int batch_size = 0;
  LatencyStats latency;          // per infer() call
  double throughput_ips = 0;     // batch_size * timed_iters / timed wall seconds
  double decode_ms_per_image = 0;  // measured outside the timed loop
  double prep_ms_per_image = 0;    // letterbox, ditto
};

struct BenchReport {
  ExecutorProfile executor;
  std::vector<BenchRow> rows;
  std::optional<std::string> baseline_name;
};

// Decodes the workload once, letterboxes once, then runs warmup_iters
// untimed and timed_iters timed infer() calls on the same fixed batch.
// Decode and preprocessing are reported separately, never inside the timed
// loop. Executor exceptions surface as ExecutorError.
BenchRow measure(Executor& executor, const BenchConfig& cfg,
                 const std::vector<std::vector<std::uint8_t>>& encoded_images);

std::string bench_report_json(const BenchReport& r);
BenchReport bench_report_from_json(const std::string& text);

// this / baseline, the paper's annotation convention for both latency and
// throughput columns.
double speedup_ratio(double value, double baseline);

// One decimal with an x suffix, e.g. "17.2x".
std::string format_ratio(double ratio);

// Latency is taken from each report's batch-size-1 row (smallest batch as
// fallback), throughput from its largest-batch row. Throws
// MissingBaselineError when baseline names no report.
std::string speedup_table_text(const std::vector<BenchReport>& reports,
                               const std::string& baseline);
std::string speedup_table_csv(const std::vector<BenchReport>& reports,
                              const std::string& baseline);

}  // namespace shelfpipe
