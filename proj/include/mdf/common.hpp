#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace mdf {

// The three named seeds every run is driven by. All other randomness
// (projection directions, subset truncation, per-pair noise streams) is
// derived from these via mix_seed.
struct Seeds {
    std::uint64_t data = 1;
    std::uint64_t init = 2;
    std::uint64_t train = 3;
};

// splitmix64 finalizer; decorrelates derived streams from their base seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt_a, std::uint64_t salt_b) {
    return mix_seed(mix_seed(seed, salt_a), salt_b);
}

// Fixed stream salts, so independent consumers of one seed never collide.
namespace salt {
inline constexpr std::uint64_t kPrototype = 0x50524F544F;    // per-class prototypes
inline constexpr std::uint64_t kDistortion = 0x44495354;     // cross-domain distortion R
inline constexpr std::uint64_t kPair = 0x50414952;           // per-pair noise streams
inline constexpr std::uint64_t kCurate = 0x43555241;         // curation subsets / ops
inline constexpr std::uint64_t kSlices = 0x534C4943;         // SWD projection directions
inline constexpr std::uint64_t kCondSubset = 0x434F4E44;     // conditional-SWD truncation
inline constexpr std::uint64_t kInitTwin = 0x54574E49;       // twin initialization
inline constexpr std::uint64_t kInitPre = 0x505245494E;      // pretrain initialization
inline constexpr std::uint64_t kPretrain = 0x505245;         // pretrain batch order
inline constexpr std::uint64_t kLabeled = 0x4C4142;          // labeled batch draws
inline constexpr std::uint64_t kUnlabEo = 0x554C45;          // unlabeled EO draws
inline constexpr std::uint64_t kUnlabSar = 0x554C53;         // unlabeled SAR draws
}  // namespace salt

namespace log {

enum class Level { Error = 0, Info = 1, Debug = 2 };

inline Level level() {
    static Level lvl = [] {
        const char* env = std::getenv("MDF_LOG");
        if (env == nullptr) return Level::Error;
        std::string s(env);
        if (s == "debug") return Level::Debug;
        if (s == "info") return Level::Info;
        return Level::Error;
    }();
    return lvl;
}

template <typename... Args>
void info(const char* fmt, Args... args) {
    if (level() >= Level::Info) {
        std::fprintf(stderr, "[mdf] ");
        std::fprintf(stderr, fmt, args...);
        std::fprintf(stderr, "\n");
    }
}

template <typename... Args>
void debug(const char* fmt, Args... args) {
    if (level() >= Level::Debug) {
        std::fprintf(stderr, "[mdf:debug] ");
        std::fprintf(stderr, fmt, args...);
        std::fprintf(stderr, "\n");
    }
}

}  // namespace log
}  // namespace mdf
