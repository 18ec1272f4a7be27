#pragma once

#include <string_view>

namespace cdil::log {

enum class Level { quiet = 0, warn = 1, info = 2 };

void set_level(Level level) noexcept;
Level level() noexcept;

/// Thread-safe single-line writes to stderr.
void warn(std::string_view msg);
void info(std::string_view msg);

}  // namespace cdil::log
