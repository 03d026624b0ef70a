#pragma once

// Brute-force reference evaluator. Same definitions as the library
// (greedy score-descending matching, 101-point interpolated AP, recall at
// 100 detections) computed by the most literal code possible: hand-rolled
// sorts, exhaustive per-grid-point scans, no envelope precomputation, no
// shared code with shelfpipe::evaluate beyond the box types. Kept test-only
// so the production path can never leak into its own oracle.

#include <vector>

#include "shelfpipe/dataset.hpp"
#include "shelfpipe/eval.hpp"
#include "shelfpipe/geometry.hpp"

namespace refeval {

struct RefImage {
  std::vector<shelfpipe::BBox> gts;        // pixel space
  std::vector<shelfpipe::Detection> dets;  // input order
};

inline double ref_iou(const shelfpipe::BBox& a, const shelfpipe::BBox& b) {
  double ax1 = a.x + a.w, ay1 = a.y + a.h;
  double bx1 = b.x + b.w, by1 = b.y + b.h;
  double ix0 = a.x > b.x ? a.x : b.x;
  double iy0 = a.y > b.y ? a.y : b.y;
  double ix1 = ax1 < bx1 ? ax1 : bx1;
  double iy1 = ay1 < by1 ? ay1 : by1;
  if (ix1 <= ix0 || iy1 <= iy0) return 0.0;
  double inter = (ix1 - ix0) * (iy1 - iy0);
  return inter / (a.w * a.h + b.w * b.h - inter);
}

struct ScoredFlag {
  double score = 0;
  bool tp = false;
};

// Stable insertion sort by descending score.
inline void sort_by_score_desc(std::vector<std::size_t>& idx, const std::vector<double>& scores) {
  for (std::size_t i = 1; i < idx.size(); ++i) {
    std::size_t cur = idx[i];
    std::size_t j = i;
    while (j > 0 && scores[idx[j - 1]] < scores[cur]) {
      idx[j] = idx[j - 1];
      --j;
    }
    idx[j] = cur;
  }
}

inline std::vector<ScoredFlag> match_all(const std::vector<RefImage>& images, double thr,
                                         int max_dets, long& total_gt, long& total_matched) {
  std::vector<ScoredFlag> pooled;
  total_gt = 0;
  total_matched = 0;
  for (const RefImage& img : images) {
    total_gt += static_cast<long>(img.gts.size());
    std::vector<double> scores;
    for (const auto& d : img.dets) scores.push_back(d.score);
    std::vector<std::size_t> order(img.dets.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    sort_by_score_desc(order, scores);
    if (static_cast<int>(order.size()) > max_dets) order.resize(max_dets);

    std::vector<bool> taken(img.gts.size(), false);
    for (std::size_t oi : order) {
      int best = -1;
      double best_iou = 0;
      for (std::size_t g = 0; g < img.gts.size(); ++g) {
        if (taken[g]) continue;
        double v = ref_iou(img.dets[oi].box, img.gts[g]);
        if (v > best_iou) {
          best_iou = v;
          best = static_cast<int>(g);
        }
      }
      bool is_tp = best >= 0 && best_iou >= thr;
      if (is_tp) {
        taken[best] = true;
        ++total_matched;
      }
      pooled.push_back({img.dets[oi].score, is_tp});
    }
  }
  // Pool is already in image order; stable sort by score across images.
  std::vector<double> pool_scores;
  for (const auto& p : pooled) pool_scores.push_back(p.score);
  std::vector<std::size_t> order(pooled.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  sort_by_score_desc(order, pool_scores);
  std::vector<ScoredFlag> sorted;
  for (std::size_t oi : order) sorted.push_back(pooled[oi]);
  return sorted;
}

inline double ap_at(const std::vector<RefImage>& images, double thr, int max_dets) {
  long total_gt = 0, total_matched = 0;
  std::vector<ScoredFlag> pooled = match_all(images, thr, max_dets, total_gt, total_matched);
  if (total_gt == 0) return 0.0;

  std::vector<double> precision, recall;
  long tp = 0;
  for (std::size_t k = 0; k < pooled.size(); ++k) {
    if (pooled[k].tp) ++tp;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(total_gt));
  }
  double sum = 0;
  for (int g = 0; g <= 100; ++g) {
    double r = g / 100.0;
    double best = 0;
    for (std::size_t k = 0; k < pooled.size(); ++k) {
      if (recall[k] >= r && precision[k] > best) best = precision[k];
    }
    sum += best;
  }
  return sum / 101.0;
}

inline double recall_at(const std::vector<RefImage>& images, double thr, int max_dets) {
  long total_gt = 0, total_matched = 0;
  match_all(images, thr, max_dets, total_gt, total_matched);
  if (total_gt == 0) return 0.0;
  return static_cast<double>(total_matched) / static_cast<double>(total_gt);
}

struct RefReport {
  double map = 0, mar = 0, maf = 0;  // percent
  std::vector<double> ap;            // per threshold, fraction
  std::vector<double> recall;
};

inline RefReport reference_evaluate(const std::vector<RefImage>& images, int max_dets = 100) {
  RefReport r;
  double ap_sum = 0, rec_sum = 0;
  for (int k = 0; k < shelfpipe::kNumIouThresholds; ++k) {
    double thr = shelfpipe::iou_threshold_at(k);
    r.ap.push_back(ap_at(images, thr, max_dets));
    r.recall.push_back(recall_at(images, thr, max_dets));
    ap_sum += r.ap.back();
    rec_sum += r.recall.back();
  }
  r.map = 100.0 * ap_sum / shelfpipe::kNumIouThresholds;
  r.mar = 100.0 * rec_sum / shelfpipe::kNumIouThresholds;
  if (r.map + r.mar > 0) r.maf = 2.0 * r.map * r.mar / (r.map + r.mar);
  return r;
}

// Converts a RefImage fixture into the library's dataset + prediction types.
struct FixtureBundle {
  shelfpipe::Dataset dataset;
  shelfpipe::PredictionSet preds;
};

inline FixtureBundle to_library_types(const std::vector<RefImage>& images, int img_w, int img_h) {
  FixtureBundle b;
  b.dataset.name = "fixture";
  for (std::size_t i = 0; i < images.size(); ++i) {
    shelfpipe::ImageRecord rec;
    rec.id = "fx_" + std::to_string(i);
    rec.file = rec.id + ".ppm";
    rec.width = img_w;
    rec.height = img_h;
    for (const shelfpipe::BBox& g : images[i].gts) {
      rec.boxes.push_back(shelfpipe::to_norm(g, img_w, img_h));
    }
    b.dataset.images.push_back(rec);
    shelfpipe::PredictedImage p;
    p.image_id = rec.id;
    p.boxes = images[i].dets;
    b.preds.push_back(std::move(p));
  }
  return b;
}

}  // namespace refeval
