#pragma once

#include <cstddef>
#include <vector>

namespace shelfpipe {

// Axis-aligned box in pixels. Origin top-left, y grows downward.
struct BBox {
  double x = 0;  // left edge
  double y = 0;  // top edge
  double w = 0;
  double h = 0;

  double x2() const { return x + w; }
  double y2() const { return y + h; }
  double area() const { return w * h; }
  bool operator==(const BBox&) const = default;
};

bool bbox_valid(const BBox& b);               // finite, w > 0, h > 0
BBox make_bbox(double x, double y, double w, double h);  // throws InvalidParamsError

// Center/size box in fractions of image width/height. Range checks are the
// lint's job (rule L1), so this stays a plain value; make_norm_box is the
// checked constructor used where the invariant must hold.
struct NormBox {
  double cx = 0, cy = 0, w = 0, h = 0;
  bool operator==(const NormBox&) const = default;
};

bool norm_box_in_bounds(const NormBox& b, double tol = 1e-9);
NormBox make_norm_box(double cx, double cy, double w, double h);  // throws if out of bounds

BBox to_pixels(const NormBox& b, double img_w, double img_h);
NormBox to_norm(const BBox& b, double img_w, double img_h);

struct Detection {
  BBox box;
  double score = 0;  // in [0, 1]
  bool operator==(const Detection&) const = default;
};

// area(a ∩ b) / area(a ∪ b). Symmetric, 0 when disjoint, exact 0 for
// zero-area intersections (no negative clamping artifacts).
double iou(const BBox& a, const BBox& b);

// Greedy class-agnostic NMS. Drops scores below score_thr, keeps the
// highest-score detection and suppresses candidates with IoU > iou_thr
// against any kept box. Ties broken by lower input index. Output sorted by
// score descending, at most max_dets entries.
std::vector<Detection> nms(const std::vector<Detection>& cands, double iou_thr = 0.45,
                           double score_thr = 0.25, std::size_t max_dets = 100);

// Aspect-preserving map from an img_w x img_h image into a square
// input_size x input_size canvas. Padding is split equally per axis with any
// odd pixel going to the bottom/right.
struct LetterboxTransform {
  double scale = 1.0;
  double pad_x = 0;
  double pad_y = 0;
  int input_size = 0;

  BBox map(const BBox& b) const {
    return {b.x * scale + pad_x, b.y * scale + pad_y, b.w * scale, b.h * scale};
  }
  BBox unmap(const BBox& b) const {
    return {(b.x - pad_x) / scale, (b.y - pad_y) / scale, b.w / scale, b.h / scale};
  }
  bool operator==(const LetterboxTransform&) const = default;
};

LetterboxTransform letterbox(int img_w, int img_h, int input_size);  // throws on non-positive args

BBox unmap_box(const LetterboxTransform& t, const BBox& b);

// Clip to [0,w] x [0,h]. Returns false when nothing is left.
bool clamp_to_image(BBox& b, double img_w, double img_h);

}  // namespace shelfpipe
