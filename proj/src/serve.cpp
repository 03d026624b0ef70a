#include "shelfpipe/serve.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <numeric>
#include <thread>

#include "shelfpipe/broker.hpp"
#include "shelfpipe/errors.hpp"
#include "shelfpipe/eval.hpp"
#include "shelfpipe/log.hpp"
#include "shelfpipe/util.hpp"

using nlohmann::json;

namespace shelfpipe {

json to_json(const ImageMessage& m) {
  return {{"image_id", m.image_id},
          {"width", m.width},
          {"height", m.height},
          {"encoding", m.encoding == ImageEncoding::ppm_b64 ? "ppm_b64" : "file_ref"},
          {"payload", m.payload},
          {"ts_ms", m.ts_ms}};
}

ImageMessage image_message_from_json(const json& j) {
  ImageMessage m;
  m.image_id = j.at("image_id").get<std::string>();
  m.width = j.at("width").get<int>();
  m.height = j.at("height").get<int>();
  std::string enc = j.at("encoding").get<std::string>();
  if (enc == "ppm_b64") {
    m.encoding = ImageEncoding::ppm_b64;
  } else if (enc == "file_ref") {
    m.encoding = ImageEncoding::file_ref;
  } else {
    throw InvalidParamsError("unknown image encoding: " + enc);
  }
  m.payload = j.at("payload").get<std::string>();
  m.ts_ms = j.value("ts_ms", std::int64_t{0});
  return m;
}

json to_json(const DetectionMessage& m) {
  json boxes = json::array();
  for (const Detection& d : m.boxes) {
    boxes.push_back(
        {{"x", d.box.x}, {"y", d.box.y}, {"w", d.box.w}, {"h", d.box.h}, {"score", d.score}});
  }
  return {{"image_id", m.image_id}, {"boxes", boxes}, {"latency_ms", m.latency_ms}, {"model", m.model}};
}

DetectionMessage detection_message_from_json(const json& j) {
  DetectionMessage m;
  m.image_id = j.at("image_id").get<std::string>();
  for (const json& jb : j.at("boxes")) {
    m.boxes.push_back({{jb["x"].get<double>(), jb["y"].get<double>(), jb["w"].get<double>(),
                        jb["h"].get<double>()},
                       jb["score"].get<double>()});
  }
  m.latency_ms = j.at("latency_ms").get<double>();
  m.model = j.at("model").get<std::string>();
  return m;
}

PipelineConfig pipeline_config_from_json(const json& j) {
  PipelineConfig cfg;
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.batch_timeout_ms = j.value("batch_timeout_ms", cfg.batch_timeout_ms);
  cfg.decode_parallelism = j.value("decode_parallelism", cfg.decode_parallelism);
  cfg.score_thr = j.value("score_thr", cfg.score_thr);
  cfg.iou_thr = j.value("iou_thr", cfg.iou_thr);
  cfg.stats_period_ms = j.value("stats_period_ms", cfg.stats_period_ms);
  if (j.contains("topics")) {
    const json& t = j["topics"];
    cfg.topics.in = t.value("in", cfg.topics.in);
    cfg.topics.out = t.value("out", cfg.topics.out);
    cfg.topics.stats = t.value("stats", cfg.topics.stats);
  }
  if (cfg.batch_size < 1) throw InvalidParamsError("batch_size must be >= 1");
  if (cfg.decode_parallelism < 1) throw InvalidParamsError("decode_parallelism must be >= 1");
  return cfg;
}

json to_json(const PipelineConfig& cfg) {
  return {{"batch_size", cfg.batch_size},
          {"batch_timeout_ms", cfg.batch_timeout_ms},
          {"decode_parallelism", cfg.decode_parallelism},
          {"score_thr", cfg.score_thr},
          {"iou_thr", cfg.iou_thr},
          {"stats_period_ms", cfg.stats_period_ms},
          {"topics", {{"in", cfg.topics.in}, {"out", cfg.topics.out}, {"stats", cfg.topics.stats}}}};
}

namespace {

Image decode_image_message(const ImageMessage& msg) {
  try {
    Image img;
    if (msg.encoding == ImageEncoding::ppm_b64) {
      img = decode_ppm(base64_decode(msg.payload));
    } else {
      img = read_ppm(msg.payload);
    }
    if (img.width != msg.width || img.height != msg.height) {
      throw Error("payload dimensions disagree with message header");
    }
    return img;
  } catch (const std::exception& e) {
    throw DecodeError(msg.image_id, e.what());
  }
}

struct PostResult {
  DetectionMessage out;
  double t0_ms = 0;  // decode start, monotonic
};

PostResult process_decoded(const ImageMessage& msg, const LetterboxTransform& t,
                           const std::vector<Detection>& raw_input_space,
                           const PipelineConfig& cfg, const std::string& model) {
  PostResult r;
  r.out.image_id = msg.image_id;
  r.out.model = model;
  for (const Detection& d : nms(raw_input_space, cfg.iou_thr, cfg.score_thr, kMaxDets)) {
    BBox b = t.unmap(d.box);
    if (clamp_to_image(b, msg.width, msg.height)) r.out.boxes.push_back({b, d.score});
  }
  return r;
}

}  // namespace

DetectionMessage pipeline_process(const ImageMessage& msg, Executor& executor,
                                  const PipelineConfig& cfg) {
  double t0 = monotonic_ms();
  Image img = decode_image_message(msg);
  LetterboxTransform t = letterbox(msg.width, msg.height, executor.profile().input_size);
  Image boxed = letterbox_image(img, t);
  InferInput in{msg.image_id, msg.width, msg.height, &boxed};
  auto raw = executor.infer(std::span<const InferInput>(&in, 1));
  PostResult r = process_decoded(msg, t, raw.at(0), cfg, executor.profile().name);
  r.out.latency_ms = monotonic_ms() - t0;
  return r.out;
}

DriftMonitor::DriftMonitor(DriftConfig cfg) : cfg_(cfg), since_alert_(cfg.window_len) {
  if (cfg_.window_len < 2) throw InvalidParamsError("drift window_len must be >= 2");
}

std::optional<std::string> DriftMonitor::update(const DetectionMessage& msg) {
  double mean_score = 0;
  if (!msg.boxes.empty()) {
    for (const Detection& d : msg.boxes) mean_score += d.score;
    mean_score /= static_cast<double>(msg.boxes.size());
  }
  counts_.push_back(static_cast<double>(msg.boxes.size()));
  scores_.push_back(mean_score);
  if (static_cast<int>(counts_.size()) > cfg_.window_len) {
    counts_.pop_front();
    scores_.pop_front();
  }
  ++since_alert_;
  if (static_cast<int>(counts_.size()) < cfg_.window_len || since_alert_ < cfg_.window_len) {
    return std::nullopt;
  }
  auto mean = [](const std::deque<double>& q) {
    return std::accumulate(q.begin(), q.end(), 0.0) / static_cast<double>(q.size());
  };
  double count_mean = mean(counts_);
  if (std::abs(count_mean - cfg_.count_ref) > cfg_.count_thr) {
    since_alert_ = 0;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "detection count drift: window mean %.3f vs reference %.3f (threshold %.3f)",
                  count_mean, cfg_.count_ref, cfg_.count_thr);
    return std::string(buf);
  }
  if (cfg_.score_ref && cfg_.score_thr) {
    double score_mean = mean(scores_);
    if (std::abs(score_mean - *cfg_.score_ref) > *cfg_.score_thr) {
      since_alert_ = 0;
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "score drift: window mean %.3f vs reference %.3f (threshold %.3f)",
                    score_mean, *cfg_.score_ref, *cfg_.score_thr);
      return std::string(buf);
    }
  }
  return std::nullopt;
}

namespace {

// Closeable bounded MPMC queue; the stage pipeline's only coupling.
template <class T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : cap_(capacity) {}

  bool push(T item) {
    std::unique_lock<std::mutex> lock(mu_);
    cv_push_.wait(lock, [&] { return closed_ || q_.size() < cap_; });
    if (closed_) return false;
    q_.push_back(std::move(item));
    cv_pop_.notify_one();
    return true;
  }

  bool pop(T& out) {
    std::unique_lock<std::mutex> lock(mu_);
    cv_pop_.wait(lock, [&] { return closed_ || !q_.empty(); });
    if (q_.empty()) return false;
    out = std::move(q_.front());
    q_.pop_front();
    cv_push_.notify_one();
    return true;
  }

  enum class PopStatus { ok, timeout, closed };

  PopStatus pop_for(T& out, int timeout_ms) {
    std::unique_lock<std::mutex> lock(mu_);
    bool got = cv_pop_.wait_for(lock, std::chrono::milliseconds(timeout_ms),
                                [&] { return closed_ || !q_.empty(); });
    if (!got) return PopStatus::timeout;
    if (q_.empty()) return PopStatus::closed;
    out = std::move(q_.front());
    q_.pop_front();
    cv_push_.notify_one();
    return PopStatus::ok;
  }

  void close() {
    std::lock_guard<std::mutex> lock(mu_);
    closed_ = true;
    cv_push_.notify_all();
    cv_pop_.notify_all();
  }

 private:
  std::size_t cap_;
  std::mutex mu_;
  std::condition_variable cv_push_, cv_pop_;
  std::deque<T> q_;
  bool closed_ = false;
};

class Semaphore {
 public:
  explicit Semaphore(int permits) : permits_(permits) {}

  void acquire() {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [&] { return permits_ > 0; });
    --permits_;
  }

  void release(int n = 1) {
    std::lock_guard<std::mutex> lock(mu_);
    permits_ += n;
    cv_.notify_all();
  }

 private:
  int permits_;
  std::mutex mu_;
  std::condition_variable cv_;
};

}  // namespace

struct Service::Impl {
  PipelineConfig cfg;
  std::unique_ptr<Executor> executor;
  std::string broker_addr;
  std::optional<DriftConfig> drift_cfg;

  struct WorkItem {
    ImageMessage msg;
    double t0_ms = 0;
    LetterboxTransform transform;
    Image boxed;
    std::vector<Detection> raw;
  };

  std::atomic<bool> stopping{false};
  std::atomic<bool> running{false};

  std::unique_ptr<BoundedQueue<ImageMessage>> decode_q;
  std::unique_ptr<BoundedQueue<WorkItem>> batch_q;
  std::unique_ptr<BoundedQueue<std::vector<WorkItem>>> infer_q;
  std::unique_ptr<BoundedQueue<WorkItem>> post_q;
  std::unique_ptr<BoundedQueue<PostResult>> pub_q;
  std::unique_ptr<Semaphore> inflight_sem;

  BrokerClient sub_client;   // consumer only
  BrokerClient pub_client;   // publisher, stats, decode-error events (mutex inside)

  std::thread bootstrap;
  std::vector<std::thread> workers;

  // counters and stats
  std::atomic<std::uint64_t> processed{0}, errors{0}, dropped{0};
  std::atomic<int> inflight{0}, peak_inflight{0};
  std::mutex stats_mu;
  std::vector<double> lat_samples;  // ring of the most recent latencies
  std::size_t lat_next = 0;
  double stage_sum[3] = {0, 0, 0};  // decode, infer, post
  std::uint64_t stage_n[3] = {0, 0, 0};

  static constexpr std::size_t kLatRing = 4096;

  void note_stage(int stage, double ms) {
    std::lock_guard<std::mutex> lock(stats_mu);
    stage_sum[stage] += ms;
    stage_n[stage]++;
  }

  void note_latency(double ms) {
    std::lock_guard<std::mutex> lock(stats_mu);
    if (lat_samples.size() < kLatRing) {
      lat_samples.push_back(ms);
    } else {
      lat_samples[lat_next % kLatRing] = ms;
    }
    lat_next++;
  }

  void enter_inflight() {
    int now = ++inflight;
    int peak = peak_inflight.load();
    while (now > peak && !peak_inflight.compare_exchange_weak(peak, now)) {
    }
  }

  void leave_inflight() {
    --inflight;
    inflight_sem->release();
  }

  BrokerClient connect_with_retry() {
    int delay_ms = 100;
    while (!stopping) {
      try {
        return BrokerClient::connect(broker_addr);
      } catch (const BrokerError&) {
        SHELFPIPE_LOG_INFO("broker %s unavailable, retrying in %d ms", broker_addr.c_str(),
                           delay_ms);
        for (int waited = 0; waited < delay_ms && !stopping; waited += 20) {
          std::this_thread::sleep_for(std::chrono::milliseconds(20));
        }
        delay_ms = std::min(delay_ms * 2, 3000);
      }
    }
    throw BrokerError("service stopped before the broker became reachable");
  }

  json stats_payload() {
    json lat = {{"p50", 0.0}, {"p95", 0.0}, {"p99", 0.0}};
    json stage = {{"decode", 0.0}, {"infer", 0.0}, {"post", 0.0}};
    {
      std::lock_guard<std::mutex> lock(stats_mu);
      if (!lat_samples.empty()) {
        std::vector<double> sorted = lat_samples;
        std::sort(sorted.begin(), sorted.end());
        lat["p50"] = percentile_sorted(sorted, 50);
        lat["p95"] = percentile_sorted(sorted, 95);
        lat["p99"] = percentile_sorted(sorted, 99);
      }
      const char* names[3] = {"decode", "infer", "post"};
      for (int i = 0; i < 3; ++i) {
        if (stage_n[i] > 0) stage[names[i]] = stage_sum[i] / static_cast<double>(stage_n[i]);
      }
    }
    return {{"processed", processed.load()},
            {"errors", errors.load()},
            {"dropped", dropped.load()},
            {"lat_ms", lat},
            {"stage_ms", stage}};
  }

  void consumer_loop() {
    while (!stopping) {
      std::optional<BrokerClient::Msg> m;
      try {
        m = sub_client.next(100);
      } catch (const BrokerError& e) {
        SHELFPIPE_LOG_ERROR("consumer: %s", e.what());
        break;
      }
      if (!m) {
        if (sub_client.closed()) break;
        continue;
      }
      ImageMessage img;
      try {
        img = image_message_from_json(m->payload);
      } catch (const std::exception& e) {
        dropped++;
        SHELFPIPE_LOG_WARN("unparseable image message dropped: %s", e.what());
        continue;
      }
      inflight_sem->acquire();
      if (stopping) {
        inflight_sem->release();
        break;
      }
      enter_inflight();
      if (!decode_q->push(std::move(img))) {
        leave_inflight();
        break;
      }
    }
  }

  void decode_loop() {
    ImageMessage msg;
    while (decode_q->pop(msg)) {
      WorkItem item;
      item.msg = std::move(msg);
      item.t0_ms = monotonic_ms();
      try {
        Image img = decode_image_message(item.msg);
        item.transform =
            letterbox(item.msg.width, item.msg.height, executor->profile().input_size);
        item.boxed = letterbox_image(img, item.transform);
      } catch (const DecodeError& e) {
        errors++;
        note_stage(0, monotonic_ms() - item.t0_ms);
        try {
          pub_client.publish(cfg.topics.stats,
                             json{{"event", "decode_error"}, {"image_id", e.image_id}});
        } catch (const BrokerError&) {
        }
        leave_inflight();
        continue;
      }
      note_stage(0, monotonic_ms() - item.t0_ms);
      if (!batch_q->push(std::move(item))) {
        leave_inflight();
        return;
      }
    }
  }

  void batcher_loop() {
    std::vector<WorkItem> batch;
    while (!stopping) {
      WorkItem first;
      if (!batch_q->pop(first)) break;
      batch.clear();
      batch.push_back(std::move(first));
      auto deadline = std::chrono::steady_clock::now() +
                      std::chrono::milliseconds(cfg.batch_timeout_ms);
      while (static_cast<int>(batch.size()) < cfg.batch_size) {
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                        deadline - std::chrono::steady_clock::now())
                        .count();
        if (left <= 0) break;
        WorkItem next;
        auto st = batch_q->pop_for(next, static_cast<int>(left));
        if (st == BoundedQueue<WorkItem>::PopStatus::ok) {
          batch.push_back(std::move(next));
        } else if (st == BoundedQueue<WorkItem>::PopStatus::closed) {
          break;
        } else {
          break;  // timeout: ship what we have
        }
      }
      if (!infer_q->push(std::move(batch))) break;
      batch = {};
    }
    // flush is unnecessary: queues drain only on stop, at-most-once applies
  }

  void infer_loop() {
    std::vector<WorkItem> batch;
    while (infer_q->pop(batch)) {
      std::vector<InferInput> inputs;
      inputs.reserve(batch.size());
      for (const WorkItem& item : batch) {
        inputs.push_back({item.msg.image_id, item.msg.width, item.msg.height, &item.boxed});
      }
      double t0 = monotonic_ms();
      std::vector<std::vector<Detection>> raw;
      try {
        raw = executor->infer(inputs);
      } catch (const std::exception& e) {
        SHELFPIPE_LOG_ERROR("executor failed: %s", e.what());
        for (std::size_t i = 0; i < batch.size(); ++i) {
          errors++;
          leave_inflight();
        }
        continue;
      }
      double per_image = (monotonic_ms() - t0) / static_cast<double>(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        note_stage(1, per_image);
        batch[i].raw = std::move(raw[i]);
        if (!post_q->push(std::move(batch[i]))) return;
      }
    }
  }

  void post_loop() {
    WorkItem item;
    while (post_q->pop(item)) {
      double t0 = monotonic_ms();
      PostResult r = process_decoded(item.msg, item.transform, item.raw, cfg,
                                     executor->profile().name);
      r.t0_ms = item.t0_ms;
      note_stage(2, monotonic_ms() - t0);
      if (!pub_q->push(std::move(r))) return;
    }
  }

  void publisher_loop() {
    std::optional<DriftMonitor> drift;
    if (drift_cfg) drift.emplace(*drift_cfg);
    PostResult r;
    while (pub_q->pop(r)) {
      r.out.latency_ms = monotonic_ms() - r.t0_ms;
      note_latency(r.out.latency_ms);
      try {
        pub_client.publish(cfg.topics.out, to_json(r.out));
      } catch (const BrokerError& e) {
        SHELFPIPE_LOG_ERROR("publish failed: %s", e.what());
        leave_inflight();
        continue;
      }
      processed++;
      if (drift) {
        if (auto alert = drift->update(r.out)) {
          try {
            pub_client.publish(cfg.topics.stats, json{{"event", "drift_alert"}, {"message", *alert}});
          } catch (const BrokerError&) {
          }
        }
      }
      leave_inflight();
    }
  }

  void stats_loop() {
    int since_emit = cfg.stats_period_ms;  // emit one right away
    while (!stopping) {
      if (since_emit >= cfg.stats_period_ms) {
        since_emit = 0;
        try {
          pub_client.publish(cfg.topics.stats, stats_payload());
        } catch (const BrokerError&) {
        }
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
      since_emit += 20;
    }
  }

  void bootstrap_and_run() {
    try {
      sub_client = connect_with_retry();
      pub_client = connect_with_retry();
      sub_client.subscribe(cfg.topics.in);
    } catch (const BrokerError& e) {
      SHELFPIPE_LOG_ERROR("service bootstrap aborted: %s", e.what());
      return;
    }
    if (stopping) return;
    running = true;
    workers.emplace_back([this] { consumer_loop(); });
    for (int i = 0; i < cfg.decode_parallelism; ++i) {
      workers.emplace_back([this] { decode_loop(); });
    }
    workers.emplace_back([this] { batcher_loop(); });
    workers.emplace_back([this] { infer_loop(); });
    for (int i = 0; i < cfg.decode_parallelism; ++i) {
      workers.emplace_back([this] { post_loop(); });
    }
    workers.emplace_back([this] { publisher_loop(); });
    workers.emplace_back([this] { stats_loop(); });
  }
};

Service::Service(PipelineConfig cfg, std::unique_ptr<Executor> executor, std::string broker_addr,
                 std::optional<DriftConfig> drift)
    : impl_(std::make_unique<Impl>()) {
  if (cfg.batch_size < 1) throw InvalidParamsError("batch_size must be >= 1");
  if (cfg.decode_parallelism < 1) throw InvalidParamsError("decode_parallelism must be >= 1");
  if (!executor) throw InvalidParamsError("service needs an executor");
  impl_->cfg = cfg;
  impl_->executor = std::move(executor);
  impl_->broker_addr = std::move(broker_addr);
  impl_->drift_cfg = drift;

  // The semaphore is the backpressure contract: at most
  // decode_parallelism + batch_size messages in flight.
  int cap = cfg.decode_parallelism + cfg.batch_size;
  impl_->inflight_sem = std::make_unique<Semaphore>(cap);
  impl_->decode_q = std::make_unique<BoundedQueue<ImageMessage>>(cap);
  impl_->batch_q = std::make_unique<BoundedQueue<Impl::WorkItem>>(cap);
  impl_->infer_q = std::make_unique<BoundedQueue<std::vector<Impl::WorkItem>>>(2);
  impl_->post_q = std::make_unique<BoundedQueue<Impl::WorkItem>>(cap);
  impl_->pub_q = std::make_unique<BoundedQueue<PostResult>>(cap);
}

Service::~Service() { stop(); }

void Service::start() {
  if (impl_->bootstrap.joinable()) throw Error("service already started");
  impl_->bootstrap = std::thread([this] { impl_->bootstrap_and_run(); });
}

void Service::stop() {
  if (impl_->stopping.exchange(true)) return;
  // Bootstrap polls the stop flag while retrying the broker, so this join is
  // quick; after it no thread reassigns the clients.
  if (impl_->bootstrap.joinable()) impl_->bootstrap.join();
  impl_->sub_client.shutdown_rd();
  impl_->decode_q->close();
  impl_->batch_q->close();
  impl_->infer_q->close();
  impl_->post_q->close();
  impl_->pub_q->close();
  impl_->inflight_sem->release(1 << 20);  // unblock a consumer stuck on backpressure
  for (auto& t : impl_->workers) {
    if (t.joinable()) t.join();
  }
  impl_->sub_client.close();
  impl_->pub_client.close();
  impl_->running = false;
}

bool Service::running() const { return impl_->running; }

ServiceStatsSnapshot Service::stats_snapshot() const {
  ServiceStatsSnapshot s;
  s.processed = impl_->processed;
  s.errors = impl_->errors;
  s.dropped = impl_->dropped;
  s.peak_inflight = impl_->peak_inflight;
  json payload = impl_->stats_payload();
  s.lat_p50 = payload["lat_ms"]["p50"].get<double>();
  s.lat_p95 = payload["lat_ms"]["p95"].get<double>();
  s.lat_p99 = payload["lat_ms"]["p99"].get<double>();
  s.stage_decode_ms = payload["stage_ms"]["decode"].get<double>();
  s.stage_infer_ms = payload["stage_ms"]["infer"].get<double>();
  s.stage_post_ms = payload["stage_ms"]["post"].get<double>();
  return s;
}

}  // namespace shelfpipe
