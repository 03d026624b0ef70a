#include "shelfpipe/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "shelfpipe/errors.hpp"
#include "shelfpipe/util.hpp"

using nlohmann::json;

namespace shelfpipe {

const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw InvalidParamsError("unknown split: " + s);
}

std::array<int, 3> Dataset::split_counts() const {
  std::array<int, 3> counts{0, 0, 0};
  for (const auto& img : images) counts[static_cast<int>(img.split)]++;
  return counts;
}

std::filesystem::path annotation_path_for(const std::filesystem::path& image_file) {
  std::filesystem::path p = image_file;
  p.replace_extension(".txt");
  return p;
}

namespace {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError(path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double parse_full_double(const std::string& tok, bool& ok) {
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  ok = end == tok.c_str() + tok.size() && !tok.empty() && std::isfinite(v);
  return v;
}

// One line per box: "0 cx cy w h", single spaces, nothing else.
std::vector<NormBox> parse_annotation(const std::filesystem::path& path) {
  std::string text = read_text_file(path);
  std::vector<NormBox> boxes;
  int line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t eol = text.find('\n', start);
    std::string line = text.substr(start, eol == std::string::npos ? std::string::npos : eol - start);
    start = eol == std::string::npos ? text.size() : eol + 1;
    ++line_no;
    auto tokens = split_on(line, ' ');
    if (tokens.size() != 5) throw MalformedLineError(path.string(), line_no, "expected 5 fields");
    if (tokens[0] != "0") throw MalformedLineError(path.string(), line_no, "class id must be 0");
    double vals[4];
    for (int k = 0; k < 4; ++k) {
      bool ok = false;
      vals[k] = parse_full_double(tokens[k + 1], ok);
      if (!ok) throw MalformedLineError(path.string(), line_no, "bad number: " + tokens[k + 1]);
    }
    if (vals[2] <= 0 || vals[3] <= 0) {
      throw MalformedLineError(path.string(), line_no, "box width/height must be positive");
    }
    boxes.push_back(NormBox{vals[0], vals[1], vals[2], vals[3]});
  }
  return boxes;
}

std::string format_annotation(const std::vector<NormBox>& boxes) {
  std::string out;
  char buf[128];
  for (const NormBox& b : boxes) {
    std::snprintf(buf, sizeof buf, "0 %.6f %.6f %.6f %.6f\n", b.cx, b.cy, b.w, b.h);
    out += buf;
  }
  return out;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  std::string text = read_text_file(manifest_path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw MalformedLineError(manifest_path.string(), 0, e.what());
  }
  if (!j.is_object() || !j.contains("name") || !j.contains("images") || j.size() != 2 ||
      !j["name"].is_string() || !j["images"].is_array()) {
    throw MalformedLineError(manifest_path.string(), 0, "manifest must be {name, images}");
  }

  Dataset d;
  d.name = j["name"].get<std::string>();
  std::filesystem::path base = manifest_path.parent_path();
  std::unordered_set<std::string> seen;
  for (const json& rec : j["images"]) {
    static const char* keys[] = {"file", "height", "id", "split", "width"};
    if (!rec.is_object() || rec.size() != 5) {
      throw MalformedLineError(manifest_path.string(), 0, "image record must have exactly id/file/width/height/split");
    }
    for (const char* k : keys) {
      if (!rec.contains(k)) {
        throw MalformedLineError(manifest_path.string(), 0, std::string("image record missing ") + k);
      }
    }
    ImageRecord img;
    img.id = rec["id"].get<std::string>();
    img.file = rec["file"].get<std::string>();
    img.width = rec["width"].get<int>();
    img.height = rec["height"].get<int>();
    img.split = split_from_string(rec["split"].get<std::string>());
    if (img.width <= 0 || img.height <= 0) {
      throw MalformedLineError(manifest_path.string(), 0, "image dimensions must be positive: " + img.id);
    }
    if (!seen.insert(img.id).second) throw DuplicateImageIdError(img.id);
    img.boxes = parse_annotation(base / annotation_path_for(img.file));
    d.images.push_back(std::move(img));
  }
  return d;
}

void save_dataset(const Dataset& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json images = json::array();
  for (const ImageRecord& img : d.images) {
    images.push_back({{"id", img.id},
                      {"file", img.file},
                      {"width", img.width},
                      {"height", img.height},
                      {"split", to_string(img.split)}});
    std::filesystem::path ann = dir / annotation_path_for(img.file);
    std::filesystem::create_directories(ann.parent_path());
    std::ofstream out(ann, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + ann.string());
    out << format_annotation(img.boxes);
  }
  json manifest = {{"name", d.name}, {"images", images}};
  std::ofstream out(dir / "dataset.json", std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

bool LintReport::has_errors() const {
  return std::any_of(findings.begin(), findings.end(),
                     [](const LintFinding& f) { return f.severity == Severity::error; });
}

int LintReport::count_rule(const std::string& rule_id) const {
  return static_cast<int>(std::count_if(findings.begin(), findings.end(),
                                        [&](const LintFinding& f) { return f.rule_id == rule_id; }));
}

namespace {

std::string short_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

LintReport lint(const Dataset& d, const LintConfig& cfg) {
  LintReport report;
  auto add = [&](std::string image_id, const char* rule, Severity sev, int box_index,
                 std::string msg) {
    report.findings.push_back({std::move(image_id), rule, sev, box_index, std::move(msg)});
  };

  for (const ImageRecord& img : d.images) {
    const auto& boxes = img.boxes;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      const NormBox& b = boxes[i];
      if (!norm_box_in_bounds(b)) {
        add(img.id, "L1", Severity::error, static_cast<int>(i), "box extends outside the image");
      }
      if (b.w * img.width < cfg.min_px || b.h * img.height < cfg.min_px) {
        add(img.id, "L2", Severity::error, static_cast<int>(i),
            "degenerate box: under " + short_num(cfg.min_px) + " px on a side");
      }
    }
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      for (std::size_t k = i + 1; k < boxes.size(); ++k) {
        const NormBox& a = boxes[i];
        const NormBox& b = boxes[k];
        // Merge candidates (annotation rule: one continuous empty location,
        // one box): same shelf row and nearly touching horizontally.
        double v_overlap = std::min(a.cy + a.h / 2, b.cy + b.h / 2) -
                           std::max(a.cy - a.h / 2, b.cy - b.h / 2);
        double gap = std::max((b.cx - b.w / 2) - (a.cx + a.w / 2),
                              (a.cx - a.w / 2) - (b.cx + b.w / 2));
        if (v_overlap > 0.5 * std::min(a.h, b.h) && gap < cfg.merge_gap_frac * std::min(a.w, b.w)) {
          add(img.id, "L3", Severity::warning, static_cast<int>(i),
              "boxes " + std::to_string(i) + " and " + std::to_string(k) +
                  " look like one continuous empty location");
        }
        double overlap = iou(to_pixels(a, img.width, img.height), to_pixels(b, img.width, img.height));
        if (overlap > cfg.dup_iou) {
          add(img.id, "L4", Severity::error, static_cast<int>(i),
              "boxes " + std::to_string(i) + " and " + std::to_string(k) +
                  " are near-duplicates (IoU " + short_num(overlap) + ")");
        }
      }
    }
    if (static_cast<int>(boxes.size()) > cfg.max_count) {
      add(img.id, "L5", Severity::warning, -1,
          std::to_string(boxes.size()) + " boxes exceeds the expected maximum of " +
              std::to_string(cfg.max_count));
    }
  }

  if (cfg.expect_splits) {
    auto actual = d.split_counts();
    const char* names[] = {"train", "val", "test"};
    for (int s = 0; s < 3; ++s) {
      if (actual[s] != (*cfg.expect_splits)[s]) {
        add("", "L6", Severity::warning, -1,
            std::string(names[s]) + " split has " + std::to_string(actual[s]) +
                " images, expected " + std::to_string((*cfg.expect_splits)[s]));
      }
    }
  }

  std::stable_sort(report.findings.begin(), report.findings.end(),
                   [](const LintFinding& a, const LintFinding& b) {
                     if (a.image_id != b.image_id) return a.image_id < b.image_id;
                     if (a.rule_id != b.rule_id) return a.rule_id < b.rule_id;
                     return a.box_index < b.box_index;
                   });
  return report;
}

StatsReport compute_stats(const Dataset& d) {
  StatsReport s;
  for (const ImageRecord& img : d.images) {
    s.count_histogram[static_cast<int>(img.boxes.size())]++;
    for (const NormBox& b : img.boxes) {
      s.size_points.emplace_back(b.w, b.h);
      s.centers.emplace_back(b.cx, b.cy);
    }
  }
  return s;
}

void write_stats_csv(const StatsReport& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(std::string("cannot write ") + name + " in " + dir.string());
    return out;
  };
  {
    auto out = open("counts.csv");
    out << "count,images\n";
    for (auto [count, images] : s.count_histogram) out << count << ',' << images << '\n';
  }
  {
    auto out = open("sizes.csv");
    out << "w,h\n";
    for (auto [w, h] : s.size_points) out << fmt_double(w) << ',' << fmt_double(h) << '\n';
  }
  {
    auto out = open("centers.csv");
    out << "cx,cy\n";
    for (auto [cx, cy] : s.centers) out << fmt_double(cx) << ',' << fmt_double(cy) << '\n';
  }
}

}  // namespace shelfpipe
