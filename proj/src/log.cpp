#include "fedngm/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace fedngm {

namespace {
std::atomic<LogLevel> g_level{LogLevel::Warning};
std::mutex g_mutex;
}  // namespace

void set_log_level(LogLevel level) { g_level = level; }

void log(LogLevel level, std::string_view message) {
  if (level < g_level.load()) return;
  static constexpr const char* kNames[] = {"debug", "info", "warning", "error"};
  std::lock_guard lock(g_mutex);
  std::cerr << "[fedngm " << kNames[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace fedngm
