// Compares the serial reference paths against the OpenMP-parallel paths for
// the three data-parallel kernels (evaluation matching, dataset generation,
// color-threshold run scan) and verifies both produce identical results.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <CLI11.hpp>

#include "shelfpipe/dataset.hpp"
#include "shelfpipe/detector.hpp"
#include "shelfpipe/eval.hpp"
#include "shelfpipe/parallel.hpp"
#include "shelfpipe/synthgen.hpp"

using namespace shelfpipe;
namespace fs = std::filesystem;

namespace {

double time_ms(const std::function<void()>& fn, int repeat) {
  double best = 1e300;
  for (int i = 0; i < repeat; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
    best = std::min(best, ms);
  }
  return best;
}

void print_row(const char* kernel, double serial_ms, double parallel_ms, bool identical) {
  std::printf("%-22s %12.2f %12.2f %9.2fx  %s\n", kernel, serial_ms, parallel_ms,
              serial_ms / parallel_ms, identical ? "identical" : "MISMATCH");
}

bool same_dir_bytes(const fs::path& a, const fs::path& b) {
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  std::vector<fs::path> rel;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), a));
  }
  std::sort(rel.begin(), rel.end());
  for (const auto& r : rel) {
    if (!fs::exists(b / r) || slurp(a / r) != slurp(b / r)) return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"parbench: serial reference vs OpenMP kernels"};
  int n_images = 200;
  int repeat = 3;
  std::uint64_t seed = 11;
  app.add_option("--images", n_images, "Workload size in images");
  app.add_option("--repeat", repeat, "Repetitions (best-of)");
  app.add_option("--seed", seed, "Workload seed");
  CLI11_PARSE(app, argc, argv);

  std::printf("threads available: %d\n", hardware_threads());
  std::printf("%-22s %12s %12s %10s  %s\n", "kernel", "serial_ms", "parallel_ms", "speedup",
              "results");

  fs::path tmp = fs::temp_directory_path() / ("parbench_" + std::to_string(::getpid()));
  fs::create_directories(tmp);

  // evaluate(): synthetic gt + noisy oracle predictions, in memory.
  {
    SceneParams p;
    p.seed = seed;
    Dataset d;
    d.name = "parbench";
    PredictionSet preds;
    NoiseParams noise;
    noise.jitter_sigma = 2.0;
    noise.drop_prob = 0.1;
    noise.fp_rate = 1.0;
    noise.tp_sd = 0.05;
    noise.fp_sd = 0.1;
    for (int i = 0; i < n_images; ++i) {
      SceneParams pi = p;
      pi.seed = seed ^ static_cast<std::uint64_t>(i);
      Scene scene = generate_scene(pi);
      ImageRecord rec;
      rec.id = "img_" + std::to_string(i);
      rec.file = rec.id + ".ppm";
      rec.width = p.img_w;
      rec.height = p.img_h;
      rec.boxes = scene.gt;
      NoiseParams ni = noise;
      ni.seed = seed ^ static_cast<std::uint64_t>(i * 977);
      PredictedImage pi_pred;
      pi_pred.image_id = rec.id;
      pi_pred.boxes = oracle_predict(rec.boxes, rec.width, rec.height, ni);
      d.images.push_back(std::move(rec));
      preds.push_back(std::move(pi_pred));
    }
    EvalReport serial_report, parallel_report;
    double s = time_ms([&] { serial_report = evaluate(preds, d, std::nullopt, ExecPolicy::serial); },
                       repeat);
    double par = time_ms(
        [&] { parallel_report = evaluate(preds, d, std::nullopt, ExecPolicy::parallel); }, repeat);
    bool same = eval_report_json(serial_report) == eval_report_json(parallel_report);
    print_row("evaluate", s, par, same);
  }

  // generate_dataset(): bytes on disk must match between policies.
  {
    SceneParams p;
    p.seed = seed;
    auto splits = std::array<int, 3>{n_images, 0, 0};
    fs::path dir_s = tmp / "gen_serial";
    fs::path dir_p = tmp / "gen_parallel";
    double s = time_ms(
        [&] {
          fs::remove_all(dir_s);
          generate_dataset(p, n_images, splits, dir_s, "parbench", ExecPolicy::serial);
        },
        repeat);
    double par = time_ms(
        [&] {
          fs::remove_all(dir_p);
          generate_dataset(p, n_images, splits, dir_p, "parbench", ExecPolicy::parallel);
        },
        repeat);
    print_row("generate_dataset", s, par, same_dir_bytes(dir_s, dir_p));
  }

  // color_threshold_detect(): one big stitched scene image.
  {
    SceneParams p;
    p.seed = seed;
    p.img_w = 1920;
    p.img_h = 1080;
    p.rows = 6;
    p.slots_per_row = 24;
    p.product_w_min = 30;
    p.product_w_max = 90;
    Generated g = generate(p);
    std::vector<Detection> out_s, out_p;
    double s = time_ms(
        [&] { out_s = color_threshold_detect(g.image, p.empty_color, 0, ExecPolicy::serial); },
        repeat);
    double par = time_ms(
        [&] { out_p = color_threshold_detect(g.image, p.empty_color, 0, ExecPolicy::parallel); },
        repeat);
    print_row("color_threshold", s, par, out_s == out_p);
  }

  fs::remove_all(tmp);
  return 0;
}
