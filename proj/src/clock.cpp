#include "sandbox/clock.hpp"

#include <cstdio>
#include <ctime>

namespace sandbox::clockutil {

namespace {
// 2000-01-01T00:00:00Z as a Unix timestamp
constexpr std::int64_t kEpoch2000 = 946684800;
}  // namespace

LogicalClock::LogicalClock(std::uint64_t start_offset_seconds)
    : next_seconds_(kEpoch2000 + static_cast<std::int64_t>(start_offset_seconds)) {}

std::chrono::system_clock::time_point LogicalClock::now() {
    std::lock_guard lock(mutex_);
    return std::chrono::system_clock::time_point(std::chrono::seconds(next_seconds_++));
}

std::string format_iso8601(std::chrono::system_clock::time_point tp) {
    std::time_t t = std::chrono::system_clock::to_time_t(tp);
    std::tm utc{};
    gmtime_r(&t, &utc);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", utc.tm_year + 1900,
                  utc.tm_mon + 1, utc.tm_mday, utc.tm_hour, utc.tm_min, utc.tm_sec);
    return buf;
}

}  // namespace sandbox::clockutil
