#include <doctest.h>

#include <cmath>

#include "shelfpipe/errors.hpp"
#include "shelfpipe/geometry.hpp"
#include "shelfpipe/rng.hpp"

using namespace shelfpipe;

namespace {

BBox random_box(SplitMix64& rng, double img_w, double img_h) {
  double w = 1 + rng.next_double() * (img_w / 2);
  double h = 1 + rng.next_double() * (img_h / 2);
  double x = rng.next_double() * (img_w - w);
  double y = rng.next_double() * (img_h - h);
  return {x, y, w, h};
}

}  // namespace

TEST_CASE("iou identity, disjoint and partial overlap") {
  BBox a{0, 0, 10, 10};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, {20, 20, 5, 5}) == 0.0);
  // intersection 1, union 7
  CHECK(iou({0, 0, 2, 2}, {1, 1, 2, 2}) == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("iou touching edges is exactly zero") {
  CHECK(iou({0, 0, 10, 10}, {10, 0, 10, 10}) == 0.0);
  CHECK(iou({0, 0, 10, 10}, {0, 10, 10, 10}) == 0.0);
}

TEST_CASE("iou is symmetric and in range on random boxes") {
  SplitMix64 rng(42);
  for (int i = 0; i < 1000; ++i) {
    BBox a = random_box(rng, 640, 480);
    BBox b = random_box(rng, 640, 480);
    double v = iou(a, b);
    CHECK(v == iou(b, a));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("bbox validation") {
  CHECK_THROWS_AS(make_bbox(0, 0, 0, 5), InvalidParamsError);
  CHECK_THROWS_AS(make_bbox(0, 0, 5, -1), InvalidParamsError);
  CHECK_THROWS_AS(make_bbox(NAN, 0, 5, 5), InvalidParamsError);
  CHECK(bbox_valid(make_bbox(-3, -2, 5, 5)));
}

TEST_CASE("norm box bounds and conversion") {
  CHECK(norm_box_in_bounds({0.5, 0.5, 1.0, 1.0}));
  CHECK_FALSE(norm_box_in_bounds({0.8, 0.5, 0.8, 0.2}));  // cx + w/2 = 1.2
  CHECK_THROWS_AS(make_norm_box(0.8, 0.5, 0.8, 0.2), InvalidParamsError);

  NormBox nb{0.25, 0.5, 0.25, 0.5};
  BBox px = to_pixels(nb, 640, 480);
  CHECK(px.x == doctest::Approx(80));
  CHECK(px.y == doctest::Approx(120));
  CHECK(px.w == doctest::Approx(160));
  CHECK(px.h == doctest::Approx(240));
  NormBox back = to_norm(px, 640, 480);
  CHECK(back.cx == doctest::Approx(nb.cx).epsilon(1e-12));
  CHECK(back.h == doctest::Approx(nb.h).epsilon(1e-12));
}

TEST_CASE("nms trivial cases") {
  CHECK(nms({}).empty());

  BBox b{0, 0, 10, 10};
  std::vector<Detection> dups = {{b, 0.9}, {b, 0.8}};
  auto kept = nms(dups, 0.45, 0.0, 100);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].score == 0.9);
}

TEST_CASE("nms suppresses by pairwise iou") {
  Detection a{{0, 0, 10, 10}, 0.9};
  Detection b{{1, 1, 10, 10}, 0.8};
  Detection c{{30, 0, 10, 10}, 0.7};
  CHECK(iou(a.box, b.box) == doctest::Approx(81.0 / 119.0).epsilon(1e-12));
  auto kept = nms({a, b, c}, 0.45, 0.0, 100);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].box == a.box);
  CHECK(kept[1].box == c.box);
}

TEST_CASE("nms score threshold, max_dets, tie order") {
  Detection lo{{0, 0, 5, 5}, 0.1};
  Detection hi{{20, 0, 5, 5}, 0.9};
  CHECK(nms({lo, hi}, 0.45, 0.25, 100).size() == 1);

  std::vector<Detection> spread;
  for (int i = 0; i < 10; ++i) spread.push_back({{i * 20.0, 0, 5, 5}, 0.5});
  auto kept = nms(spread, 0.45, 0.0, 3);
  REQUIRE(kept.size() == 3);
  // equal scores keep input order
  CHECK(kept[0].box.x == 0.0);
  CHECK(kept[1].box.x == 20.0);
  CHECK(kept[2].box.x == 40.0);
}

TEST_CASE("nms properties on random inputs") {
  SplitMix64 rng(7);
  for (int round = 0; round < 200; ++round) {
    std::vector<Detection> cands;
    int n = 1 + static_cast<int>(rng.next_below(30));
    for (int i = 0; i < n; ++i) {
      cands.push_back({random_box(rng, 200, 200), rng.next_double()});
    }
    double thr = 0.3 + 0.4 * rng.next_double();
    auto kept = nms(cands, thr, 0.0, 100);

    for (std::size_t i = 0; i < kept.size(); ++i) {
      // subset of input
      CHECK(std::find_if(cands.begin(), cands.end(), [&](const Detection& d) {
              return d.box == kept[i].box && d.score == kept[i].score;
            }) != cands.end());
      // sorted by score
      if (i > 0) CHECK(kept[i - 1].score >= kept[i].score);
      // pairwise bound
      for (std::size_t k = 0; k < i; ++k) CHECK(iou(kept[i].box, kept[k].box) <= thr);
    }
    // idempotence
    auto again = nms(kept, thr, 0.0, 100);
    CHECK(again == kept);
  }
}

TEST_CASE("letterbox examples") {
  LetterboxTransform id = letterbox(100, 100, 100);
  CHECK(id.scale == 1.0);
  CHECK(id.pad_x == 0.0);
  CHECK(id.pad_y == 0.0);

  LetterboxTransform wide = letterbox(200, 100, 100);
  CHECK(wide.scale == 0.5);
  CHECK(wide.pad_x == 0.0);
  CHECK(wide.pad_y == 25.0);

  LetterboxTransform tall = letterbox(100, 200, 100);
  CHECK(tall.scale == 0.5);
  CHECK(tall.pad_x == 25.0);
  CHECK(tall.pad_y == 0.0);

  CHECK_THROWS_AS(letterbox(0, 100, 100), InvalidParamsError);
}

TEST_CASE("letterbox odd remainder goes bottom/right") {
  // 99x100 into 100: content 99 wide, 1 px leftover, left pad 0
  LetterboxTransform t = letterbox(99, 100, 100);
  CHECK(t.scale == 1.0);
  CHECK(t.pad_x == 0.0);
}

TEST_CASE("unmap_box inverse arithmetic") {
  LetterboxTransform t{0.5, 0.0, 25.0, 100};
  BBox out = unmap_box(t, {10, 30, 20, 10});
  CHECK(out.x == doctest::Approx(20));
  CHECK(out.y == doctest::Approx(10));
  CHECK(out.w == doctest::Approx(40));
  CHECK(out.h == doctest::Approx(20));
}

TEST_CASE("letterbox round trip under 1e-6 relative error") {
  SplitMix64 rng(99);
  for (int i = 0; i < 1000; ++i) {
    int img_w = 16 + static_cast<int>(rng.next_below(2000));
    int img_h = 16 + static_cast<int>(rng.next_below(2000));
    int input = 32 + static_cast<int>(rng.next_below(1500));
    LetterboxTransform t = letterbox(img_w, img_h, input);
    BBox b = random_box(rng, img_w, img_h);
    BBox rt = t.unmap(t.map(b));
    CHECK(std::abs(rt.x - b.x) <= 1e-6 * std::max(1.0, std::abs(b.x)));
    CHECK(std::abs(rt.y - b.y) <= 1e-6 * std::max(1.0, std::abs(b.y)));
    CHECK(std::abs(rt.w - b.w) <= 1e-6 * b.w);
    CHECK(std::abs(rt.h - b.h) <= 1e-6 * b.h);
  }
}

TEST_CASE("clamp_to_image") {
  BBox b{-5, -5, 20, 20};
  CHECK(clamp_to_image(b, 100, 100));
  CHECK(b.x == 0.0);
  CHECK(b.y == 0.0);
  CHECK(b.w == 15.0);

  BBox gone{200, 200, 10, 10};
  CHECK_FALSE(clamp_to_image(gone, 100, 100));
}
