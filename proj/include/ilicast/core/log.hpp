#pragma once

#include <atomic>
#include <iostream>
#include <mutex>
#include <string>

namespace ilicast::log {

enum class Level { quiet = 0, warn = 1, info = 2 };

inline std::atomic<Level>& level() {
    static std::atomic<Level> lvl{Level::warn};
    return lvl;
}

inline void set_level(Level l) { level().store(l); }

inline std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}

inline void warn(const std::string& msg) {
    if (level().load() >= Level::warn) {
        std::lock_guard lock(sink_mutex());
        std::clog << "warning: " << msg << '\n';
    }
}

inline void info(const std::string& msg) {
    if (level().load() >= Level::info) {
        std::lock_guard lock(sink_mutex());
        std::clog << msg << '\n';
    }
}

} // namespace ilicast::log
