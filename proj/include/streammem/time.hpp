#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace streammem {

inline constexpr std::int64_t kMicrosPerSecond = 1'000'000;
inline constexpr std::int64_t kMicrosPerDay = 86'400 * kMicrosPerSecond;

/// Microseconds since the Unix epoch. Synthetic streams use logical ticks
/// (one request per second) on the same scale.
struct Timestamp {
    std::int64_t us = 0;

    friend constexpr auto operator<=>(Timestamp, Timestamp) = default;

    static constexpr Timestamp from_seconds(double s) {
        return Timestamp{static_cast<std::int64_t>(s * static_cast<double>(kMicrosPerSecond))};
    }
    constexpr double seconds() const { return static_cast<double>(us) / kMicrosPerSecond; }
};

/// Seconds elapsed from `earlier` to `later` (negative if reversed).
constexpr double seconds_between(Timestamp earlier, Timestamp later) {
    return static_cast<double>(later.us - earlier.us) / kMicrosPerSecond;
}

/// ISO-8601 UTC rendering, e.g. "2023-05-08T13:56:00Z". Sub-second digits
/// are appended only when non-zero.
std::string to_iso8601(Timestamp ts);

}  // namespace streammem
