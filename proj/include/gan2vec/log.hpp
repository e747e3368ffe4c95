#pragma once

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>

namespace gan2vec {

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

// Process-wide log threshold; initialized from GAN2VEC_LOG_LEVEL (default info).
inline LogLevel& log_threshold() {
    static LogLevel level = [] {
        const char* env = std::getenv("GAN2VEC_LOG_LEVEL");
        std::string v = env ? env : "info";
        if (v == "error") return LogLevel::error;
        if (v == "warn") return LogLevel::warn;
        if (v == "debug") return LogLevel::debug;
        return LogLevel::info;
    }();
    return level;
}

inline void log_line(LogLevel level, const std::string& msg) {
    if (level > log_threshold()) return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << "\n";
}

inline void log_error(const std::string& msg) { log_line(LogLevel::error, msg); }
inline void log_warn(const std::string& msg) { log_line(LogLevel::warn, msg); }
inline void log_info(const std::string& msg) { log_line(LogLevel::info, msg); }
inline void log_debug(const std::string& msg) { log_line(LogLevel::debug, msg); }

}  // namespace gan2vec
