#include "cdil/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace cdil::log {

namespace {
std::atomic<Level> g_level{Level::warn};
std::mutex g_mutex;

void emit(const char* prefix, std::string_view msg) {
  std::lock_guard lock(g_mutex);
  std::cerr << prefix << msg << '\n';
}
}  // namespace

void set_level(Level level) noexcept { g_level.store(level); }
Level level() noexcept { return g_level.load(); }

void warn(std::string_view msg) {
  if (level() >= Level::warn) emit("cdil: warning: ", msg);
}

void info(std::string_view msg) {
  if (level() >= Level::info) emit("cdil: ", msg);
}

}  // namespace cdil::log
