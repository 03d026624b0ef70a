#include "shelfpipe/detector.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>

#include <json.hpp>

#include "shelfpipe/errors.hpp"
#include "shelfpipe/rng.hpp"
#include "shelfpipe/util.hpp"

using nlohmann::json;

namespace shelfpipe {

const char* to_string(Precision p) { return p == Precision::fp32 ? "fp32" : "fp16"; }

Precision precision_from_string(const std::string& s) {
  if (s == "fp32") return Precision::fp32;
  if (s == "fp16") return Precision::fp16;
  throw InvalidParamsError("unknown precision: " + s);
}

std::vector<Detection> oracle_predict(const std::vector<NormBox>& gt, int img_w, int img_h,
                                      const NoiseParams& n) {
  SplitMix64 rng(n.seed);
  std::vector<Detection> out;
  auto clamp01 = [](double v) { return std::min(1.0, std::max(0.0, v)); };

  for (const NormBox& nb : gt) {
    bool dropped = rng.next_bernoulli(n.drop_prob);
    double jx0 = rng.next_gaussian(0, n.jitter_sigma);
    double jy0 = rng.next_gaussian(0, n.jitter_sigma);
    double jx1 = rng.next_gaussian(0, n.jitter_sigma);
    double jy1 = rng.next_gaussian(0, n.jitter_sigma);
    double score = clamp01(rng.next_gaussian(n.tp_mean, n.tp_sd));
    if (dropped) continue;  // draws above keep the stream position fixed per box
    BBox b = to_pixels(nb, img_w, img_h);
    double x0 = b.x + jx0;
    double y0 = b.y + jy0;
    double x1 = b.x2() + jx1;
    double y1 = b.y2() + jy1;
    if (x1 <= x0) x1 = x0 + 1e-3;
    if (y1 <= y0) y1 = y0 + 1e-3;
    out.push_back({{x0, y0, x1 - x0, y1 - y0}, score});
  }

  int n_fp = rng.next_poisson(n.fp_rate);
  for (int i = 0; i < n_fp; ++i) {
    double w = (0.05 + 0.20 * rng.next_double()) * img_w;
    double h = (0.05 + 0.20 * rng.next_double()) * img_h;
    double x = rng.next_double() * (img_w - w);
    double y = rng.next_double() * (img_h - h);
    double score = clamp01(rng.next_gaussian(n.fp_mean, n.fp_sd));
    out.push_back({{x, y, w, h}, score});
  }
  return out;
}

std::vector<Detection> color_threshold_detect(const Image& img, Rgb empty_color, int tol,
                                              ExecPolicy policy) {
  struct Run {
    int x0, x1;
  };
  auto matches = [&](Rgb c) {
    return std::abs(int(c.r) - int(empty_color.r)) <= tol &&
           std::abs(int(c.g) - int(empty_color.g)) <= tol &&
           std::abs(int(c.b) - int(empty_color.b)) <= tol;
  };

  std::vector<std::vector<Run>> rows(img.height);
  parallel_for(static_cast<std::size_t>(img.height), policy, [&](std::size_t y) {
    auto& runs = rows[y];
    int start = -1;
    for (int x = 0; x < img.width; ++x) {
      if (matches(img.at(x, static_cast<int>(y)))) {
        if (start < 0) start = x;
      } else if (start >= 0) {
        runs.push_back({start, x});
        start = -1;
      }
    }
    if (start >= 0) runs.push_back({start, img.width});
  });

  // Stitch equal-extent runs on consecutive pixel rows into rectangles.
  struct Open {
    int x0, x1, y0;
  };
  std::vector<Open> open, next_open;
  std::vector<Detection> out;
  auto close_rect = [&](const Open& o, int y_end) {
    out.push_back({{static_cast<double>(o.x0), static_cast<double>(o.y0),
                    static_cast<double>(o.x1 - o.x0), static_cast<double>(y_end - o.y0)},
                   1.0});
  };
  for (int y = 0; y < img.height; ++y) {
    next_open.clear();
    std::size_t oi = 0;
    for (const Run& r : rows[y]) {
      // Both lists are x-sorted; advance over open rects ending before r.
      while (oi < open.size() && open[oi].x1 <= r.x0) close_rect(open[oi++], y);
      if (oi < open.size() && open[oi].x0 == r.x0 && open[oi].x1 == r.x1) {
        next_open.push_back(open[oi++]);
      } else {
        next_open.push_back({r.x0, r.x1, y});
        while (oi < open.size() && open[oi].x0 < r.x1) close_rect(open[oi++], y);
      }
    }
    while (oi < open.size()) close_rect(open[oi++], y);
    std::swap(open, next_open);
  }
  for (const Open& o : open) close_rect(o, img.height);

  std::sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
    if (a.box.y != b.box.y) return a.box.y < b.box.y;
    return a.box.x < b.box.x;
  });
  return out;
}

GtIndex build_gt_index(const Dataset& d) {
  GtIndex idx;
  for (const ImageRecord& img : d.images) {
    idx[img.id] = GtEntry{img.width, img.height, img.boxes};
  }
  return idx;
}

OracleExecutor::OracleExecutor(ExecutorProfile profile, GtIndex gt, NoiseParams noise)
    : Executor(std::move(profile)), gt_(std::move(gt)), noise_(noise) {}

std::vector<std::vector<Detection>> OracleExecutor::infer(std::span<const InferInput> batch) {
  std::vector<std::vector<Detection>> out;
  out.reserve(batch.size());
  for (const InferInput& in : batch) {
    auto it = gt_.find(in.image_id);
    if (it == gt_.end()) throw ExecutorError("oracle executor has no gt for image " + in.image_id);
    NoiseParams n = noise_;
    n.seed = noise_.seed ^ fnv1a64(in.image_id.data(), in.image_id.size());
    std::vector<Detection> dets = oracle_predict(it->second.boxes, it->second.width,
                                                 it->second.height, n);
    LetterboxTransform t = letterbox(it->second.width, it->second.height, profile_.input_size);
    for (Detection& d : dets) d.box = t.map(d.box);
    out.push_back(std::move(dets));
  }
  return out;
}

ColorThresholdExecutor::ColorThresholdExecutor(ExecutorProfile profile, Rgb empty_color, int tol)
    : Executor(std::move(profile)), empty_color_(empty_color), tol_(tol) {}

std::vector<std::vector<Detection>> ColorThresholdExecutor::infer(
    std::span<const InferInput> batch) {
  std::vector<std::vector<Detection>> out;
  out.reserve(batch.size());
  for (const InferInput& in : batch) {
    if (in.pixels == nullptr) throw ExecutorError("color executor needs pixels");
    out.push_back(color_threshold_detect(*in.pixels, empty_color_, tol_));
  }
  return out;
}

SimulatedExecutor::SimulatedExecutor(ExecutorProfile profile, std::unique_ptr<Executor> inner)
    : Executor(std::move(profile)), inner_(std::move(inner)) {
  if (!profile_.declared_cost) throw InvalidParamsError("simulated executor needs declared_cost");
}

std::vector<std::vector<Detection>> SimulatedExecutor::infer(std::span<const InferInput> batch) {
  auto start = std::chrono::steady_clock::now();
  std::vector<std::vector<Detection>> out;
  if (inner_) {
    out = inner_->infer(batch);
  } else {
    out.resize(batch.size());
  }
  double budget_ms =
      profile_.declared_cost->base_ms + profile_.declared_cost->per_image_ms * batch.size();
  auto deadline = start + std::chrono::duration<double, std::milli>(budget_ms);
  while (std::chrono::steady_clock::now() < deadline) {
    // spin; sub-millisecond precision matters more than a free core here
  }
  return out;
}

SubprocessExecutor::SubprocessExecutor(ExecutorProfile profile, std::vector<std::string> argv)
    : Executor(std::move(profile)), argv_(std::move(argv)) {
  if (argv_.empty()) throw InvalidParamsError("subprocess executor needs a command");
  spawn();
}

void SubprocessExecutor::spawn() {
  int to_child[2];
  int from_child[2];
  if (pipe(to_child) != 0 || pipe(from_child) != 0) throw ExecutorError("pipe() failed");
  pid_t pid = fork();
  if (pid < 0) throw ExecutorError("fork() failed");
  if (pid == 0) {
    dup2(to_child[0], STDIN_FILENO);
    dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    std::vector<char*> args;
    for (auto& a : argv_) args.push_back(a.data());
    args.push_back(nullptr);
    execvp(args[0], args.data());
    _exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  child_pid_ = pid;
  to_child_ = to_child[1];
  from_child_ = from_child[0];
}

SubprocessExecutor::~SubprocessExecutor() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (child_pid_ > 0) {
    int status = 0;
    waitpid(child_pid_, &status, 0);
  }
}

std::string SubprocessExecutor::request_line(const InferInput& in) const {
  json req;
  req["image_id"] = in.image_id;
  req["input_size"] = profile_.input_size;
  if (in.pixels != nullptr) {
    auto bytes = encode_ppm(*in.pixels);
    req["pixels"] = base64_encode(bytes.data(), bytes.size());
  } else {
    req["pixels"] = "";
  }
  return req.dump() + "\n";
}

std::vector<std::vector<Detection>> SubprocessExecutor::infer(std::span<const InferInput> batch) {
  std::vector<std::vector<Detection>> out;
  out.reserve(batch.size());
  std::string buffer;
  for (const InferInput& in : batch) {
    std::string line = request_line(in);
    std::size_t off = 0;
    while (off < line.size()) {
      ssize_t n = ::write(to_child_, line.data() + off, line.size() - off);
      if (n <= 0) throw ExecutorError("subprocess executor: child closed stdin pipe");
      off += static_cast<std::size_t>(n);
    }
    // One response line per request.
    std::size_t eol;
    while ((eol = buffer.find('\n')) == std::string::npos) {
      char chunk[4096];
      ssize_t n = ::read(from_child_, chunk, sizeof chunk);
      if (n <= 0) throw ExecutorError("subprocess executor: child closed stdout pipe");
      buffer.append(chunk, static_cast<std::size_t>(n));
    }
    std::string resp_line = buffer.substr(0, eol);
    buffer.erase(0, eol + 1);
    json resp;
    try {
      resp = json::parse(resp_line);
    } catch (const json::exception& e) {
      throw ExecutorError(std::string("subprocess executor: bad response json: ") + e.what());
    }
    if (!resp.contains("image_id") || resp["image_id"].get<std::string>() != in.image_id) {
      throw ExecutorError("subprocess executor: response image_id mismatch");
    }
    std::vector<Detection> dets;
    for (const json& jd : resp["detections"]) {
      dets.push_back({{jd["x"].get<double>(), jd["y"].get<double>(), jd["w"].get<double>(),
                       jd["h"].get<double>()},
                      jd["score"].get<double>()});
    }
    out.push_back(std::move(dets));
  }
  return out;
}

}  // namespace shelfpipe
