#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "shelfpipe/geometry.hpp"

namespace shelfpipe {

enum class Split { train, val, test };

const char* to_string(Split s);
Split split_from_string(const std::string& s);  // throws InvalidParamsError

struct ImageRecord {
  std::string id;    // unique within a dataset
  std::string file;  // path relative to the manifest directory
  int width = 0;
  int height = 0;
  Split split = Split::train;
  std::vector<NormBox> boxes;
};

struct Dataset {
  std::string name;
  std::vector<ImageRecord> images;

  std::array<int, 3> split_counts() const;  // train, val, test
};

// Annotation file sits next to the image: extension swapped for ".txt".
std::filesystem::path annotation_path_for(const std::filesystem::path& image_file);

// Manifest is dataset.json; each record's boxes come from its annotation
// file, one "0 cx cy w h" line per box. Parsing is strict: malformed lines
// are rejected, not skipped. Range checks (boxes outside [0,1]) are left to
// lint so that bad data can be loaded and reported.
Dataset load_dataset(const std::filesystem::path& manifest_path);

// Writes dataset.json plus one annotation file per image, canonical
// formatting (sorted JSON keys, six decimals per coordinate). save(load(x))
// is byte-identical.
void save_dataset(const Dataset& d, const std::filesystem::path& dir);

enum class Severity { error, warning };

struct LintFinding {
  std::string image_id;  // empty for dataset-level findings
  std::string rule_id;   // "L1".."L6"
  Severity severity = Severity::warning;
  int box_index = -1;    // first box involved, -1 when not box-scoped
  std::string message;
};

struct LintConfig {
  double min_px = 2.0;           // L2: degenerate box threshold in pixels
  double merge_gap_frac = 0.25;  // L3: gap threshold as fraction of the narrower box
  double dup_iou = 0.9;          // L4: near-duplicate IoU
  int max_count = 15;            // L5: boxes per image
  // L6 fires only when an expected train/val/test census is configured.
  // The reference configuration from the source dataset is 800/100/100.
  std::optional<std::array<int, 3>> expect_splits;
};

struct LintReport {
  std::vector<LintFinding> findings;  // sorted by (image id, rule id, box index)

  bool has_errors() const;
  int count_rule(const std::string& rule_id) const;
};

LintReport lint(const Dataset& d, const LintConfig& cfg = {});

struct StatsReport {
  std::map<int, int> count_histogram;                    // boxes-per-image -> image count
  std::vector<std::pair<double, double>> size_points;    // (w, h) normalized, one per box
  std::vector<std::pair<double, double>> centers;        // (cx, cy) normalized, one per box
};

StatsReport compute_stats(const Dataset& d);

// counts.csv, sizes.csv, centers.csv with header rows; numbers round-trip.
void write_stats_csv(const StatsReport& s, const std::filesystem::path& dir);

}  // namespace shelfpipe
