#include "rydtrap/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace rydtrap::log {

namespace {
std::atomic<Level> g_level{Level::info};
std::function<void(Level, const std::string&)> g_sink;
std::mutex g_mutex;

const char* tag(Level l) {
    switch (l) {
        case Level::debug: return "debug";
        case Level::info: return "info";
        case Level::warn: return "warn";
        case Level::error: return "error";
    }
    return "?";
}
}  // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

void set_sink(std::function<void(Level, const std::string&)> sink) {
    std::lock_guard lock(g_mutex);
    g_sink = std::move(sink);
}

void write(Level level, const std::string& message) {
    if (level < g_level.load()) return;
    std::lock_guard lock(g_mutex);
    if (g_sink) {
        g_sink(level, message);
        return;
    }
    std::cerr << "[" << tag(level) << "] " << message << '\n';
}

}  // namespace rydtrap::log
