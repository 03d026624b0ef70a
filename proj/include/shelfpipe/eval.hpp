#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shelfpipe/dataset.hpp"
#include "shelfpipe/geometry.hpp"
#include "shelfpipe/parallel.hpp"

namespace shelfpipe {

struct PredictedImage {
  std::string image_id;
  std::vector<Detection> boxes;  // pixel coordinates
};

using PredictionSet = std::vector<PredictedImage>;

// JSON Lines, one object per image: {"image_id", "boxes": [{x,y,w,h,score}]}.
PredictionSet load_predictions_jsonl(const std::filesystem::path& path);
void save_predictions_jsonl(const PredictionSet& preds, const std::filesystem::path& path);

inline constexpr int kMaxDets = 100;
inline constexpr int kNumIouThresholds = 10;  // 0.50, 0.55, ..., 0.95

double iou_threshold_at(int k);

struct ImageMatch {
  std::string image_id;
  std::vector<double> scores;                  // kept detections, score-descending, <= kMaxDets
  std::vector<std::optional<int>> matched_gt;  // per kept detection, index into the image's gt
  int n_gt = 0;

  int matched_count() const;
};

struct MatchResult {
  double iou_thr = 0;
  std::vector<ImageMatch> images;  // dataset order
};

// Greedy matching: detections sorted by score descending (ties by input
// order), truncated to max_dets; each takes the unmatched gt with the
// highest IoU when that IoU >= iou_thr. split = nullopt evaluates all
// images. Throws UnknownImageIdError for predictions naming absent images.
MatchResult match(const PredictionSet& preds, const Dataset& gts, std::optional<Split> split,
                  double iou_thr, int max_dets = kMaxDets);

// 101-point interpolated AP: precision envelope sampled at recall
// 0.00, 0.01, ..., 1.00 with detections pooled across images by score.
// Zero gt yields 0.
double average_precision(const MatchResult& matches);

double recall_at_max_dets(const MatchResult& matches);

struct PerIou {
  double ap = 0;          // fraction
  double max_recall = 0;  // fraction
};

struct EvalReport {
  double map = 0;  // percent
  double mar = 0;  // percent
  double maf = 0;  // percent
  std::map<std::string, PerIou> per_iou;  // "0.50" .. "0.95"
  int max_dets = kMaxDets;
  int n_images = 0;
  int n_gt = 0;
};

// Harmonic mean of two percentages; 0 when both are 0.
double maf(double map_pct, double mar_pct);

// Per-(image, threshold) matching is data-parallel; the reduction order is
// fixed, so serial and parallel policies produce identical reports.
EvalReport evaluate(const PredictionSet& preds, const Dataset& gts,
                    std::optional<Split> split = std::nullopt,
                    ExecPolicy policy = ExecPolicy::parallel);

std::string eval_report_json(const EvalReport& r);
EvalReport eval_report_from_json(const std::string& text);

struct CurvePoint {
  std::string model_name;
  int train_size = 0;
  double map = 0, mar = 0, maf = 0;  // percent
};

// Sorted by (model, train_size). Throws DuplicateKeyError on a repeated
// (model, train_size) pair.
std::vector<CurvePoint> curve_aggregate(std::vector<CurvePoint> points);

// model,train_size,map,mar,maf with header row.
std::string curve_csv(const std::vector<CurvePoint>& points);

}  // namespace shelfpipe
