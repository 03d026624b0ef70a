#include "shelfpipe/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "shelfpipe/errors.hpp"

namespace shelfpipe {

bool bbox_valid(const BBox& b) {
  return std::isfinite(b.x) && std::isfinite(b.y) && std::isfinite(b.w) && std::isfinite(b.h) &&
         b.w > 0 && b.h > 0;
}

BBox make_bbox(double x, double y, double w, double h) {
  BBox b{x, y, w, h};
  if (!bbox_valid(b)) throw InvalidParamsError("invalid bbox");
  return b;
}

bool norm_box_in_bounds(const NormBox& b, double tol) {
  return b.w > 0 && b.h > 0 && b.cx - b.w / 2 >= -tol && b.cx + b.w / 2 <= 1 + tol &&
         b.cy - b.h / 2 >= -tol && b.cy + b.h / 2 <= 1 + tol;
}

NormBox make_norm_box(double cx, double cy, double w, double h) {
  NormBox b{cx, cy, w, h};
  if (!norm_box_in_bounds(b)) throw InvalidParamsError("norm box out of unit bounds");
  return b;
}

BBox to_pixels(const NormBox& b, double img_w, double img_h) {
  return {(b.cx - b.w / 2) * img_w, (b.cy - b.h / 2) * img_h, b.w * img_w, b.h * img_h};
}

NormBox to_norm(const BBox& b, double img_w, double img_h) {
  return {(b.x + b.w / 2) / img_w, (b.y + b.h / 2) / img_h, b.w / img_w, b.h / img_h};
}

double iou(const BBox& a, const BBox& b) {
  double ix = std::min(a.x2(), b.x2()) - std::max(a.x, b.x);
  double iy = std::min(a.y2(), b.y2()) - std::max(a.y, b.y);
  if (ix <= 0 || iy <= 0) return 0.0;
  double inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

std::vector<Detection> nms(const std::vector<Detection>& cands, double iou_thr, double score_thr,
                           std::size_t max_dets) {
  if (max_dets < 1) throw InvalidParamsError("max_dets must be >= 1");
  std::vector<std::size_t> order;
  order.reserve(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (cands[i].score >= score_thr) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return cands[a].score > cands[b].score;  // stable: ties keep input order
  });
  std::vector<Detection> kept;
  for (std::size_t idx : order) {
    if (kept.size() >= max_dets) break;
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (iou(cands[idx].box, k.box) > iou_thr) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(cands[idx]);
  }
  return kept;
}

LetterboxTransform letterbox(int img_w, int img_h, int input_size) {
  if (img_w <= 0 || img_h <= 0 || input_size <= 0) {
    throw InvalidParamsError("letterbox arguments must be positive");
  }
  double s = static_cast<double>(input_size);
  double scale = std::min(s / img_w, s / img_h);
  // Pixel-quantized content size; odd leftover pixel lands bottom/right.
  double scaled_w = std::round(img_w * scale);
  double scaled_h = std::round(img_h * scale);
  LetterboxTransform t;
  t.scale = scale;
  t.pad_x = std::floor((s - scaled_w) / 2.0);
  t.pad_y = std::floor((s - scaled_h) / 2.0);
  t.input_size = input_size;
  return t;
}

BBox unmap_box(const LetterboxTransform& t, const BBox& b) { return t.unmap(b); }

bool clamp_to_image(BBox& b, double img_w, double img_h) {
  double x0 = std::max(b.x, 0.0);
  double y0 = std::max(b.y, 0.0);
  double x1 = std::min(b.x2(), img_w);
  double y1 = std::min(b.y2(), img_h);
  if (x1 - x0 <= 0 || y1 - y0 <= 0) return false;
  b = {x0, y0, x1 - x0, y1 - y0};
  return true;
}

}  // namespace shelfpipe
