#include "humorgen/clock.hpp"

#include <ctime>
#include <thread>

namespace humorgen {

Clock& Clock::system() {
  static SystemClock clock;
  return clock;
}

Clock::time_point SystemClock::now() const {
  return std::chrono::time_point_cast<duration>(std::chrono::steady_clock::now());
}

void SystemClock::sleep_until(time_point t) { std::this_thread::sleep_until(t); }

Clock::time_point FakeClock::now() const {
  std::lock_guard lock(mu_);
  return now_;
}

void FakeClock::sleep_until(time_point t) {
  std::lock_guard lock(mu_);
  if (t > now_) now_ = t;
}

void FakeClock::advance(duration d) {
  std::lock_guard lock(mu_);
  now_ += d;
}

std::string utc_timestamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace humorgen
