#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "shelfpipe/detector.hpp"
#include "shelfpipe/geometry.hpp"

namespace shelfpipe {

enum class ImageEncoding { ppm_b64, file_ref };

struct ImageMessage {
  std::string image_id;
  int width = 0;
  int height = 0;
  ImageEncoding encoding = ImageEncoding::ppm_b64;
  std::string payload;  // base64 PPM bytes, or a filesystem path
  std::int64_t ts_ms = 0;
};

nlohmann::json to_json(const ImageMessage& m);
ImageMessage image_message_from_json(const nlohmann::json& j);

struct DetectionMessage {
  std::string image_id;
  std::vector<Detection> boxes;  // original-image pixel coordinates, within bounds
  double latency_ms = 0;
  std::string model;
};

nlohmann::json to_json(const DetectionMessage& m);
DetectionMessage detection_message_from_json(const nlohmann::json& j);

struct Topics {
  std::string in = "shelf.images";
  std::string out = "shelf.detections";
  std::string stats = "shelf.stats";
};

struct PipelineConfig {
  int batch_size = 1;  // CPU finding: small models peak at batch size 1
  int batch_timeout_ms = 20;
  int decode_parallelism = 2;
  double score_thr = 0.25;
  double iou_thr = 0.45;
  Topics topics;
  int stats_period_ms = 1000;
};

// decode -> letterbox -> infer -> nms -> unmap, boxes clamped to the image.
// latency_ms is decode-to-return on the monotonic clock. Throws DecodeError
// on a bad payload. Pure math path: identical input gives identical boxes.
DetectionMessage pipeline_process(const ImageMessage& msg, Executor& executor,
                                  const PipelineConfig& cfg);

struct DriftConfig {
  int window_len = 50;
  double count_ref = 0;
  double count_thr = 0;  // alert when |window mean count - count_ref| > count_thr
  std::optional<double> score_ref;  // optional second channel on mean score
  std::optional<double> score_thr;
};

// Sliding window over per-image detection counts and mean scores. Alerts at
// most once per window_len samples.
class DriftMonitor {
 public:
  explicit DriftMonitor(DriftConfig cfg);  // throws InvalidParamsError if window_len < 2

  std::optional<std::string> update(const DetectionMessage& msg);

 private:
  DriftConfig cfg_;
  std::deque<double> counts_;
  std::deque<double> scores_;
  int since_alert_ = 0;
};

struct ServiceStatsSnapshot {
  std::uint64_t processed = 0;
  std::uint64_t errors = 0;   // decode failures
  std::uint64_t dropped = 0;  // unparseable messages
  double lat_p50 = 0, lat_p95 = 0, lat_p99 = 0;
  double stage_decode_ms = 0, stage_infer_ms = 0, stage_post_ms = 0;
  int peak_inflight = 0;
};

// Streaming service: consume the in topic, run the pipeline, publish
// detections on the out topic and periodic stats on the stats topic.
// Stages: decode pool (parallel, stateless) -> batch former -> one exclusive
// inference lane -> postprocess pool -> publisher. A counting semaphore caps
// in-flight messages at decode_parallelism + batch_size. Broker outages are
// retried with capped exponential backoff.
class Service {
 public:
  Service(PipelineConfig cfg, std::unique_ptr<Executor> executor, std::string broker_addr,
          std::optional<DriftConfig> drift = std::nullopt);
  ~Service();

  void start();
  void stop();
  bool running() const;

  ServiceStatsSnapshot stats_snapshot() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PipelineConfig& cfg);

}  // namespace shelfpipe
