#pragma once

#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace shelfpipe {

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

// Level comes from SHELFPIPE_LOG (error|warn|info|debug), default warn.
inline LogLevel& log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("SHELFPIPE_LOG");
    if (env == nullptr) return LogLevel::warn;
    if (std::strcmp(env, "error") == 0) return LogLevel::error;
    if (std::strcmp(env, "warn") == 0) return LogLevel::warn;
    if (std::strcmp(env, "info") == 0) return LogLevel::info;
    if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
    return LogLevel::warn;
  }();
  return level;
}

inline void log_at(LogLevel lvl, const char* fmt, ...) {
  if (static_cast<int>(lvl) > static_cast<int>(log_level())) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::fprintf(stderr, "[%s] ", names[static_cast<int>(lvl)]);
  va_list ap;
  va_start(ap, fmt);
  std::vfprintf(stderr, fmt, ap);
  va_end(ap);
  std::fputc('\n', stderr);
}

#define SHELFPIPE_LOG_ERROR(...) ::shelfpipe::log_at(::shelfpipe::LogLevel::error, __VA_ARGS__)
#define SHELFPIPE_LOG_WARN(...) ::shelfpipe::log_at(::shelfpipe::LogLevel::warn, __VA_ARGS__)
#define SHELFPIPE_LOG_INFO(...) ::shelfpipe::log_at(::shelfpipe::LogLevel::info, __VA_ARGS__)
#define SHELFPIPE_LOG_DEBUG(...) ::shelfpipe::log_at(::shelfpipe::LogLevel::debug, __VA_ARGS__)

}  // namespace shelfpipe
