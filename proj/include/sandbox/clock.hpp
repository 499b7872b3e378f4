#pragma once

#include <chrono>
#include <cstdint>
#include <mutex>
#include <string>

namespace sandbox::clockutil {

// Timestamp source for records and logs. Budget enforcement always uses
// std::chrono::steady_clock directly and is not affected by this interface.
class Clock {
  public:
    virtual ~Clock() = default;
    virtual std::chrono::system_clock::time_point now() = 0;
};

class SystemClock : public Clock {
  public:
    std::chrono::system_clock::time_point now() override {
        return std::chrono::system_clock::now();
    }
};

// Deterministic clock for reproducible runs: starts at 2000-01-01T00:00:00Z
// and advances one second per reading.
class LogicalClock : public Clock {
  public:
    explicit LogicalClock(std::uint64_t start_offset_seconds = 0);
    std::chrono::system_clock::time_point now() override;

  private:
    std::mutex mutex_;
    std::int64_t next_seconds_;
};

// "YYYY-MM-DDThh:mm:ssZ", UTC, whole seconds.
std::string format_iso8601(std::chrono::system_clock::time_point tp);

}  // namespace sandbox::clockutil
