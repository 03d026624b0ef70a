#include "shelfpipe/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "shelfpipe/errors.hpp"
#include "shelfpipe/util.hpp"

using nlohmann::json;

namespace shelfpipe {

PredictionSet load_predictions_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError(path.string());
  PredictionSet preds;
  std::unordered_set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) throw MalformedLineError(path.string(), line_no, "empty line");
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw MalformedLineError(path.string(), line_no, e.what());
    }
    if (!j.is_object() || !j.contains("image_id") || !j.contains("boxes")) {
      throw MalformedLineError(path.string(), line_no, "expected {image_id, boxes}");
    }
    PredictedImage img;
    img.image_id = j["image_id"].get<std::string>();
    if (!seen.insert(img.image_id).second) {
      throw MalformedLineError(path.string(), line_no, "duplicate image_id " + img.image_id);
    }
    for (const json& jb : j["boxes"]) {
      Detection d{{jb["x"].get<double>(), jb["y"].get<double>(), jb["w"].get<double>(),
                   jb["h"].get<double>()},
                  jb["score"].get<double>()};
      if (!bbox_valid(d.box) || !std::isfinite(d.score)) {
        throw MalformedLineError(path.string(), line_no, "invalid box in " + img.image_id);
      }
      img.boxes.push_back(d);
    }
    preds.push_back(std::move(img));
  }
  return preds;
}

void save_predictions_jsonl(const PredictionSet& preds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const PredictedImage& img : preds) {
    json boxes = json::array();
    for (const Detection& d : img.boxes) {
      boxes.push_back(
          {{"x", d.box.x}, {"y", d.box.y}, {"w", d.box.w}, {"h", d.box.h}, {"score", d.score}});
    }
    json j = {{"image_id", img.image_id}, {"boxes", boxes}};
    out << j.dump() << '\n';
  }
}

double iou_threshold_at(int k) { return (50 + 5 * k) / 100.0; }

int ImageMatch::matched_count() const {
  return static_cast<int>(std::count_if(matched_gt.begin(), matched_gt.end(),
                                        [](const std::optional<int>& m) { return m.has_value(); }));
}

namespace {

struct SelectedImage {
  const ImageRecord* rec = nullptr;
  const PredictedImage* pred = nullptr;  // null when no predictions for this image
};

std::vector<SelectedImage> select_images(const PredictionSet& preds, const Dataset& gts,
                                         std::optional<Split> split) {
  std::vector<SelectedImage> sel;
  std::unordered_map<std::string, std::size_t> by_id;
  for (const ImageRecord& rec : gts.images) {
    if (split && rec.split != *split) continue;
    by_id.emplace(rec.id, sel.size());
    sel.push_back({&rec, nullptr});
  }
  for (const PredictedImage& p : preds) {
    auto it = by_id.find(p.image_id);
    if (it == by_id.end()) throw UnknownImageIdError(p.image_id);
    sel[it->second].pred = &p;
  }
  return sel;
}

ImageMatch match_one(const SelectedImage& sel, double iou_thr, int max_dets) {
  ImageMatch m;
  m.image_id = sel.rec->id;
  m.n_gt = static_cast<int>(sel.rec->boxes.size());

  std::vector<BBox> gt_px;
  gt_px.reserve(sel.rec->boxes.size());
  for (const NormBox& b : sel.rec->boxes) gt_px.push_back(to_pixels(b, sel.rec->width, sel.rec->height));

  if (sel.pred == nullptr) return m;

  std::vector<std::size_t> order(sel.pred->boxes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sel.pred->boxes[a].score > sel.pred->boxes[b].score;  // ties keep input order
  });
  if (order.size() > static_cast<std::size_t>(max_dets)) order.resize(max_dets);

  std::vector<bool> gt_taken(gt_px.size(), false);
  for (std::size_t idx : order) {
    const Detection& det = sel.pred->boxes[idx];
    int best_gt = -1;
    double best_iou = 0;
    for (std::size_t g = 0; g < gt_px.size(); ++g) {
      if (gt_taken[g]) continue;
      double v = iou(det.box, gt_px[g]);
      if (v > best_iou) {  // strict: IoU ties go to the lower gt index
        best_iou = v;
        best_gt = static_cast<int>(g);
      }
    }
    m.scores.push_back(det.score);
    if (best_gt >= 0 && best_iou >= iou_thr) {
      gt_taken[best_gt] = true;
      m.matched_gt.push_back(best_gt);
    } else {
      m.matched_gt.push_back(std::nullopt);
    }
  }
  return m;
}

}  // namespace

MatchResult match(const PredictionSet& preds, const Dataset& gts, std::optional<Split> split,
                  double iou_thr, int max_dets) {
  MatchResult result;
  result.iou_thr = iou_thr;
  for (const SelectedImage& sel : select_images(preds, gts, split)) {
    result.images.push_back(match_one(sel, iou_thr, max_dets));
  }
  return result;
}

double average_precision(const MatchResult& matches) {
  long total_gt = 0;
  for (const ImageMatch& m : matches.images) total_gt += m.n_gt;
  if (total_gt == 0) return 0.0;

  struct Pooled {
    double score;
    bool tp;
  };
  std::vector<Pooled> pool;
  for (const ImageMatch& m : matches.images) {
    for (std::size_t i = 0; i < m.scores.size(); ++i) {
      pool.push_back({m.scores[i], m.matched_gt[i].has_value()});
    }
  }
  std::stable_sort(pool.begin(), pool.end(),
                   [](const Pooled& a, const Pooled& b) { return a.score > b.score; });

  std::vector<double> precision(pool.size()), recall(pool.size());
  long tp = 0;
  for (std::size_t k = 0; k < pool.size(); ++k) {
    if (pool[k].tp) ++tp;
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
    recall[k] = static_cast<double>(tp) / static_cast<double>(total_gt);
  }
  // Precision envelope, then 101-point sampling.
  for (std::size_t k = pool.size(); k-- > 1;) {
    precision[k - 1] = std::max(precision[k - 1], precision[k]);
  }
  double sum = 0;
  for (int g = 0; g <= 100; ++g) {
    double r = g / 100.0;
    auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / 101.0;
}

double recall_at_max_dets(const MatchResult& matches) {
  long total_gt = 0, matched = 0;
  for (const ImageMatch& m : matches.images) {
    total_gt += m.n_gt;
    matched += m.matched_count();
  }
  if (total_gt == 0) return 0.0;
  return static_cast<double>(matched) / static_cast<double>(total_gt);
}

double maf(double map_pct, double mar_pct) {
  if (map_pct + mar_pct <= 0) return 0.0;
  return 2.0 * map_pct * mar_pct / (map_pct + mar_pct);
}

EvalReport evaluate(const PredictionSet& preds, const Dataset& gts, std::optional<Split> split,
                    ExecPolicy policy) {
  std::vector<SelectedImage> sel = select_images(preds, gts, split);

  // One flat task per (threshold, image); slots are preassigned so the
  // reduction below is order-independent of scheduling.
  std::vector<MatchResult> per_thr(kNumIouThresholds);
  for (int t = 0; t < kNumIouThresholds; ++t) {
    per_thr[t].iou_thr = iou_threshold_at(t);
    per_thr[t].images.resize(sel.size());
  }
  parallel_for(sel.size() * kNumIouThresholds, policy, [&](std::size_t task) {
    std::size_t t = task / sel.size();
    std::size_t i = task % sel.size();
    per_thr[t].images[i] = match_one(sel[i], iou_threshold_at(static_cast<int>(t)), kMaxDets);
  });

  EvalReport report;
  report.n_images = static_cast<int>(sel.size());
  for (const SelectedImage& s : sel) report.n_gt += static_cast<int>(s.rec->boxes.size());

  double ap_sum = 0, recall_sum = 0;
  char key[8];
  for (int t = 0; t < kNumIouThresholds; ++t) {
    PerIou p;
    p.ap = average_precision(per_thr[t]);
    p.max_recall = recall_at_max_dets(per_thr[t]);
    ap_sum += p.ap;
    recall_sum += p.max_recall;
    std::snprintf(key, sizeof key, "%.2f", iou_threshold_at(t));
    report.per_iou[key] = p;
  }
  report.map = 100.0 * ap_sum / kNumIouThresholds;
  report.mar = 100.0 * recall_sum / kNumIouThresholds;
  report.maf = maf(report.map, report.mar);
  return report;
}

std::string eval_report_json(const EvalReport& r) {
  json per_iou = json::object();
  for (const auto& [key, p] : r.per_iou) {
    per_iou[key] = {{"ap", p.ap}, {"max_recall", p.max_recall}};
  }
  json j = {{"map", r.map},       {"mar", r.mar},           {"maf", r.maf},
            {"per_iou", per_iou}, {"max_dets", r.max_dets}, {"n_images", r.n_images},
            {"n_gt", r.n_gt}};
  return j.dump(2) + "\n";
}

EvalReport eval_report_from_json(const std::string& text) {
  json j = json::parse(text);
  EvalReport r;
  r.map = j["map"].get<double>();
  r.mar = j["mar"].get<double>();
  r.maf = j["maf"].get<double>();
  r.max_dets = j["max_dets"].get<int>();
  r.n_images = j["n_images"].get<int>();
  r.n_gt = j["n_gt"].get<int>();
  for (auto it = j["per_iou"].begin(); it != j["per_iou"].end(); ++it) {
    r.per_iou[it.key()] = {it.value()["ap"].get<double>(), it.value()["max_recall"].get<double>()};
  }
  return r;
}

std::vector<CurvePoint> curve_aggregate(std::vector<CurvePoint> points) {
  if (points.empty()) throw InvalidParamsError("curve_aggregate: no points");
  std::sort(points.begin(), points.end(), [](const CurvePoint& a, const CurvePoint& b) {
    if (a.model_name != b.model_name) return a.model_name < b.model_name;
    return a.train_size < b.train_size;
  });
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].model_name == points[i - 1].model_name &&
        points[i].train_size == points[i - 1].train_size) {
      throw DuplicateKeyError("duplicate curve point: " + points[i].model_name + " @ " +
                              std::to_string(points[i].train_size));
    }
  }
  return points;
}

std::string curve_csv(const std::vector<CurvePoint>& points) {
  std::string out = "model,train_size,map,mar,maf\n";
  for (const CurvePoint& p : points) {
    out += p.model_name + ',' + std::to_string(p.train_size) + ',' + fmt_double(p.map) + ',' +
           fmt_double(p.mar) + ',' + fmt_double(p.maf) + '\n';
  }
  return out;
}

}  // namespace shelfpipe
