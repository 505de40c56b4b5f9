#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace microdispatch::log {

enum class Level : int { quiet = 0, info = 1, debug = 2 };

// Verbosity comes from the MICRODISPATCH_LOG environment variable
// ("info" or "debug"; anything else / unset means warnings only).
inline Level level() {
    static Level lv = [] {
        const char* env = std::getenv("MICRODISPATCH_LOG");
        if (env == nullptr) return Level::quiet;
        if (std::strcmp(env, "debug") == 0) return Level::debug;
        if (std::strcmp(env, "info") == 0) return Level::info;
        return Level::quiet;
    }();
    return lv;
}

template <typename... Args>
void info(const char* fmt, Args... args) {
    if (level() >= Level::info) {
        std::fprintf(stderr, "[info] ");
        std::fprintf(stderr, fmt, args...);
        std::fprintf(stderr, "\n");
    }
}

template <typename... Args>
void debug(const char* fmt, Args... args) {
    if (level() >= Level::debug) {
        std::fprintf(stderr, "[debug] ");
        std::fprintf(stderr, fmt, args...);
        std::fprintf(stderr, "\n");
    }
}

template <typename... Args>
void warn(const char* fmt, Args... args) {
    std::fprintf(stderr, "[warn] ");
    std::fprintf(stderr, fmt, args...);
    std::fprintf(stderr, "\n");
}

} // namespace microdispatch::log
