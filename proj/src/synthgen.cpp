#include "shelfpipe/synthgen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>

#include "shelfpipe/errors.hpp"
#include "shelfpipe/rng.hpp"

namespace shelfpipe {

namespace {

void validate(const SceneParams& p) {
  if (p.img_w <= 0 || p.img_h <= 0) throw InvalidParamsError("image dimensions must be positive");
  if (p.rows < 1) throw InvalidParamsError("rows must be >= 1");
  if (p.slots_per_row < 1) throw InvalidParamsError("slots_per_row must be >= 1");
  if (p.empty_prob < 0 || p.empty_prob > 1) throw InvalidParamsError("empty_prob must be in [0,1]");
  if (p.product_w_min < 1 || p.product_w_max < p.product_w_min) {
    throw InvalidParamsError("bad product width range");
  }
  if (p.palette.empty()) throw InvalidParamsError("palette must not be empty");
  for (const Rgb& c : p.palette) {
    if (c == p.empty_color) throw InvalidParamsError("palette must not contain the empty color");
  }
  if (p.board_color == p.empty_color || p.frame_color == p.empty_color) {
    throw InvalidParamsError("board/frame colors must differ from the empty color");
  }
  if (p.margin_px < 0 || p.board_px < 0) throw InvalidParamsError("negative layout sizes");

  int interior_w = p.img_w - 2 * p.margin_px;
  int band_h = (p.img_h - 2 * p.margin_px) / p.rows;
  if (interior_w < 2 * p.slots_per_row) throw InvalidParamsError("too many slots for the image width");
  if (band_h - p.board_px < 4) throw InvalidParamsError("rows too short for the image height");
}

}  // namespace

Scene generate_scene(const SceneParams& p) {
  validate(p);
  SplitMix64 rng(p.seed);

  int interior_w = p.img_w - 2 * p.margin_px;
  int band_h = (p.img_h - 2 * p.margin_px) / p.rows;
  int zone_h = band_h - p.board_px;

  Scene scene;
  scene.rows.resize(p.rows);
  for (int r = 0; r < p.rows; ++r) {
    SceneRow& row = scene.rows[r];
    row.y0 = p.margin_px + r * band_h;
    row.y1 = row.y0 + zone_h;

    // Raw widths rescaled so the slots exactly tile the interior width.
    std::vector<std::int64_t> raw(p.slots_per_row);
    std::int64_t total = 0;
    for (auto& w : raw) {
      w = rng.next_in(p.product_w_min, p.product_w_max);
      total += w;
    }
    std::int64_t acc = 0;
    int prev_edge = 0;
    for (int s = 0; s < p.slots_per_row; ++s) {
      acc += raw[s];
      int edge = static_cast<int>(std::llround(static_cast<double>(interior_w) *
                                               static_cast<double>(acc) / static_cast<double>(total)));
      Slot slot;
      slot.x0 = p.margin_px + prev_edge;
      slot.x1 = p.margin_px + edge;
      if (slot.x1 <= slot.x0) throw InvalidParamsError("slot collapsed to zero width");
      slot.empty = rng.next_bernoulli(p.empty_prob);
      if (!slot.empty) slot.color = p.palette[rng.next_below(p.palette.size())];
      row.slots.push_back(slot);
      prev_edge = edge;
    }

    // Contiguous empty slots collapse into one ground-truth box (annotation
    // rule: a continuous empty location gets a single bounding box).
    int run_start = -1;
    auto flush = [&](int run_end_slot) {
      if (run_start < 0) return;
      int x0 = row.slots[run_start].x0;
      int x1 = row.slots[run_end_slot].x1;
      NormBox b;
      b.cx = (x0 + x1) / 2.0 / p.img_w;
      b.cy = (row.y0 + row.y1) / 2.0 / p.img_h;
      b.w = static_cast<double>(x1 - x0) / p.img_w;
      b.h = static_cast<double>(zone_h) / p.img_h;
      scene.gt.push_back(b);
      run_start = -1;
    };
    for (int s = 0; s < p.slots_per_row; ++s) {
      if (row.slots[s].empty) {
        if (run_start < 0) run_start = s;
      } else if (run_start >= 0) {
        flush(s - 1);
      }
    }
    flush(p.slots_per_row - 1);
  }
  return scene;
}

Image render_scene(const Scene& scene, const SceneParams& p) {
  Image img = Image::filled(p.img_w, p.img_h, p.frame_color);
  for (const SceneRow& row : scene.rows) {
    for (const Slot& slot : row.slots) {
      img.fill_rect(slot.x0, row.y0, slot.x1, row.y1,
                    slot.empty ? p.empty_color : slot.color);
    }
    if (!row.slots.empty()) {
      img.fill_rect(row.slots.front().x0, row.y1, row.slots.back().x1, row.y1 + p.board_px,
                    p.board_color);
    }
  }
  return img;
}

Generated generate(const SceneParams& p) {
  Scene scene = generate_scene(p);
  return {render_scene(scene, p), std::move(scene.gt)};
}

Dataset generate_dataset(const SceneParams& p, int n_images, std::array<int, 3> splits,
                         const std::filesystem::path& out_dir, const std::string& name,
                         ExecPolicy policy) {
  validate(p);
  if (n_images < 0) throw InvalidParamsError("n_images must be >= 0");
  if (splits[0] + splits[1] + splits[2] != n_images) {
    throw InvalidParamsError("split counts must sum to n_images");
  }
  if (splits[0] < 0 || splits[1] < 0 || splits[2] < 0) {
    throw InvalidParamsError("split counts must be non-negative");
  }

  std::filesystem::create_directories(out_dir / "images");

  Dataset d;
  d.name = name;
  d.images.resize(n_images);

  std::atomic<bool> failed{false};
  std::string error_msg;
  std::mutex error_mu;

  parallel_for(static_cast<std::size_t>(n_images), policy, [&](std::size_t i) {
    if (failed.load(std::memory_order_relaxed)) return;
    try {
      SceneParams pi = p;
      pi.seed = p.seed ^ static_cast<std::uint64_t>(i);
      Generated g = generate(pi);

      char stem[32];
      std::snprintf(stem, sizeof stem, "img_%06zu", i);
      ImageRecord rec;
      rec.id = stem;
      rec.file = std::string("images/") + stem + ".ppm";
      rec.width = p.img_w;
      rec.height = p.img_h;
      rec.split = i < static_cast<std::size_t>(splits[0])          ? Split::train
                  : i < static_cast<std::size_t>(splits[0] + splits[1]) ? Split::val
                                                                        : Split::test;
      // Boxes quantized to the annotation file's six decimals so the
      // returned dataset equals what load_dataset reads back.
      rec.boxes = std::move(g.gt);
      for (NormBox& b : rec.boxes) {
        b.cx = std::round(b.cx * 1e6) / 1e6;
        b.cy = std::round(b.cy * 1e6) / 1e6;
        b.w = std::round(b.w * 1e6) / 1e6;
        b.h = std::round(b.h * 1e6) / 1e6;
      }
      write_ppm(g.image, out_dir / rec.file);
      d.images[i] = std::move(rec);
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(error_mu);
      failed = true;
      error_msg = e.what();
    }
  });
  if (failed) throw IoError("generate_dataset: " + error_msg);

  save_dataset(d, out_dir);
  return d;
}

}  // namespace shelfpipe
