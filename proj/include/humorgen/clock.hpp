#pragma once

#include <chrono>
#include <mutex>
#include <string>

namespace humorgen {

/// Time source for backoff, rate budgets and lease expiry. Tests substitute FakeClock.
class Clock {
 public:
  using duration = std::chrono::milliseconds;
  using time_point = std::chrono::time_point<std::chrono::steady_clock, duration>;

  virtual ~Clock() = default;
  virtual time_point now() const = 0;
  virtual void sleep_until(time_point t) = 0;
  void sleep_for(duration d) { sleep_until(now() + d); }

  /// Process-wide steady clock.
  static Clock& system();
};

class SystemClock final : public Clock {
 public:
  time_point now() const override;
  void sleep_until(time_point t) override;
};

/// Manually driven clock. sleep_until() jumps time forward instead of blocking.
class FakeClock final : public Clock {
 public:
  time_point now() const override;
  void sleep_until(time_point t) override;
  void advance(duration d);

 private:
  mutable std::mutex mu_;
  time_point now_{duration{1'000'000}};
};

/// Wall-clock UTC timestamp, ISO-8601 with seconds.
std::string utc_timestamp();

}  // namespace humorgen
