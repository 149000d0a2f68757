#pragma once

#include <functional>
#include <string>

namespace rydtrap::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3 };

/// Messages below the threshold are dropped. Default: info.
void set_level(Level level);
Level level();

/// Replace the sink (default writes "[level] message" to stderr). Passing an
/// empty function restores the default. Not thread-safe to swap mid-run.
void set_sink(std::function<void(Level, const std::string&)> sink);

void write(Level level, const std::string& message);
inline void debug(const std::string& m) { write(Level::debug, m); }
inline void info(const std::string& m) { write(Level::info, m); }
inline void warn(const std::string& m) { write(Level::warn, m); }
inline void error(const std::string& m) { write(Level::error, m); }

}  // namespace rydtrap::log
