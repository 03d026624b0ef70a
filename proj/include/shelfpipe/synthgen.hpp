#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "shelfpipe/dataset.hpp"
#include "shelfpipe/geometry.hpp"
#include "shelfpipe/parallel.hpp"
#include "shelfpipe/ppm.hpp"

namespace shelfpipe {

// Shelf scenes are axis-aligned by construction: rows of full-height slots,
// each slot either a product or a gap showing the empty backboard color.
// Contiguous empty slots merge into one ground-truth box per row.
struct SceneParams {
  int img_w = 640;
  int img_h = 480;
  int rows = 3;
  int slots_per_row = 10;
  double empty_prob = 0.2;
  int product_w_min = 40;  // raw slot width draw, pixels (rescaled to fit the row)
  int product_w_max = 100;
  std::vector<Rgb> palette = {{196, 60, 48},  {235, 171, 52}, {58, 124, 189},
                              {72, 158, 92},  {214, 214, 214}, {142, 84, 158}};
  std::uint64_t seed = 0;

  // Rendering layout. The margin keeps boxes off the image border so that
  // six-decimal annotation rounding cannot push an edge past 1.0.
  int margin_px = 4;
  int board_px = 12;  // shelf board strip below each row's product zone
  Rgb empty_color = {18, 18, 18};
  Rgb board_color = {150, 110, 70};
  Rgb frame_color = {90, 90, 96};
};

struct Slot {
  bool empty = false;
  Rgb color;   // product color when not empty
  int x0 = 0;  // absolute pixel bounds within the image
  int x1 = 0;
};

struct SceneRow {
  int y0 = 0;  // product zone, board strip excluded
  int y1 = 0;
  std::vector<Slot> slots;
};

struct Scene {
  std::vector<SceneRow> rows;
  std::vector<NormBox> gt;  // merged empty runs, full row height each
};

// Deterministic in (params, seed), including rendered bytes.
Scene generate_scene(const SceneParams& p);                    // throws InvalidParamsError
Image render_scene(const Scene& scene, const SceneParams& p);

struct Generated {
  Image image;
  std::vector<NormBox> gt;
};

Generated generate(const SceneParams& p);

// Writes images/img_NNNNNN.ppm, annotations and dataset.json under out_dir.
// Image i uses substream seed p.seed XOR i; split assignment is by index
// (train first, then val, then test). Per-image work is independent, so the
// parallel policy only changes wall time, never bytes.
Dataset generate_dataset(const SceneParams& p, int n_images, std::array<int, 3> splits,
                         const std::filesystem::path& out_dir,
                         const std::string& name = "synthetic",
                         ExecPolicy policy = ExecPolicy::parallel);

}  // namespace shelfpipe
