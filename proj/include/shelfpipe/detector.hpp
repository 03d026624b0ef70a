#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "shelfpipe/dataset.hpp"
#include "shelfpipe/geometry.hpp"
#include "shelfpipe/parallel.hpp"
#include "shelfpipe/ppm.hpp"

namespace shelfpipe {

enum class Precision { fp32, fp16 };

const char* to_string(Precision p);
Precision precision_from_string(const std::string& s);

struct CostModel {
  double base_ms = 0;
  double per_image_ms = 0;
};

struct ExecutorProfile {
  std::string name;
  double params_m = 0;    // metadata only
  int input_size = 640;   // square model input side
  Precision precision = Precision::fp32;
  std::optional<CostModel> declared_cost;
};

struct InferInput {
  std::string image_id;
  int orig_w = 0;
  int orig_h = 0;
  const Image* pixels = nullptr;  // letterboxed to input_size; null when the executor ignores pixels
};

// Batch-in, detections-out contract. Outputs are pre-NMS, in letterboxed
// input-space coordinates, one list per input. An instance is owned by a
// single inference lane at a time; it need not be internally thread-safe.
class Executor {
 public:
  explicit Executor(ExecutorProfile profile) : profile_(std::move(profile)) {}
  virtual ~Executor() = default;

  const ExecutorProfile& profile() const { return profile_; }

  virtual std::vector<std::vector<Detection>> infer(std::span<const InferInput> batch) = 0;

 protected:
  ExecutorProfile profile_;
};

struct NoiseParams {
  double jitter_sigma = 0;  // Gaussian corner jitter, pixels
  double drop_prob = 0;
  double fp_rate = 0;       // Poisson mean of false positives per image
  double tp_mean = 0.9, tp_sd = 0.0;
  double fp_mean = 0.3, fp_sd = 0.0;
  std::uint64_t seed = 0;
};

// Ground truth degraded by controlled noise, in original-image pixels.
// Deterministic in n.seed. With zero noise the output equals gt exactly with
// score tp_mean.
std::vector<Detection> oracle_predict(const std::vector<NormBox>& gt, int img_w, int img_h,
                                      const NoiseParams& n);

// Rectangles of empty-colored pixels (per-channel |delta| <= tol), built by
// stitching equal-extent horizontal runs across adjacent pixel rows. Scores
// fixed at 1.0. Sorted by (y, x). The run scan is data-parallel per pixel
// row; the stitch is serial either way.
std::vector<Detection> color_threshold_detect(const Image& img, Rgb empty_color, int tol,
                                              ExecPolicy policy = ExecPolicy::parallel);

struct GtEntry {
  int width = 0;
  int height = 0;
  std::vector<NormBox> boxes;
};

using GtIndex = std::unordered_map<std::string, GtEntry>;

GtIndex build_gt_index(const Dataset& d);

// Emits oracle_predict results mapped into input space. The per-image noise
// substream is seed XOR fnv1a(image_id), so results do not depend on how a
// stream of images happens to be batched.
class OracleExecutor : public Executor {
 public:
  OracleExecutor(ExecutorProfile profile, GtIndex gt, NoiseParams noise);
  std::vector<std::vector<Detection>> infer(std::span<const InferInput> batch) override;

 private:
  GtIndex gt_;
  NoiseParams noise_;
};

class ColorThresholdExecutor : public Executor {
 public:
  ColorThresholdExecutor(ExecutorProfile profile, Rgb empty_color, int tol);
  std::vector<std::vector<Detection>> infer(std::span<const InferInput> batch) override;

 private:
  Rgb empty_color_;
  int tol_;
};

// Burns base_ms + per_image_ms * batch_size of wall time per call (spin on
// the monotonic clock, inner executor time counted toward the budget), then
// returns the inner executor's detections or empty lists.
class SimulatedExecutor : public Executor {
 public:
  explicit SimulatedExecutor(ExecutorProfile profile, std::unique_ptr<Executor> inner = nullptr);
  std::vector<std::vector<Detection>> infer(std::span<const InferInput> batch) override;

 private:
  std::unique_ptr<Executor> inner_;
};

// Adapter for out-of-process model runtimes: one JSON object per line on the
// child's standard streams. Request {"image_id", "input_size", "pixels"
// (base64 PPM)}; response {"image_id", "detections": [{x,y,w,h,score}]}.
// The wire schema matches the serve payloads.
class SubprocessExecutor : public Executor {
 public:
  SubprocessExecutor(ExecutorProfile profile, std::vector<std::string> argv);
  ~SubprocessExecutor() override;
  std::vector<std::vector<Detection>> infer(std::span<const InferInput> batch) override;

 private:
  void spawn();
  std::string request_line(const InferInput& in) const;

  std::vector<std::string> argv_;
  int child_pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
};

}  // namespace shelfpipe
