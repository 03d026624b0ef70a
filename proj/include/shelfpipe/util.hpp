#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

namespace shelfpipe {

// Shortest representation that round-trips the exact double value.
std::string fmt_double(double v);

std::string base64_encode(const std::uint8_t* data, std::size_t len);
std::vector<std::uint8_t> base64_decode(const std::string& text);  // throws Error on bad input

std::vector<std::string> split_on(const std::string& s, char sep);

inline std::int64_t epoch_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

inline double monotonic_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// Nearest-rank percentile over an already sorted sample vector.
double percentile_sorted(const std::vector<double>& sorted, double pct);

}  // namespace shelfpipe
