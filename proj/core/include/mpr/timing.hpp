#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <string>
#include <type_traits>
#include <utility>

namespace mpr {

using SteadyClock = std::chrono::steady_clock;

inline std::int64_t elapsed_ms_since(SteadyClock::time_point start) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(SteadyClock::now() - start).count();
}

// Runs fn and reports wall-clock milliseconds on the monotonic clock.
// Returns (result, ms), or just ms when fn returns void.
template <typename F>
auto measure_elapsed(F&& fn) {
  const auto start = SteadyClock::now();
  if constexpr (std::is_void_v<std::invoke_result_t<F>>) {
    std::forward<F>(fn)();
    return elapsed_ms_since(start);
  } else {
    auto result = std::forward<F>(fn)();
    return std::pair<decltype(result), std::int64_t>(std::move(result), elapsed_ms_since(start));
  }
}

// Splits one run into named phases. Each phase is charged the difference of
// the floored cumulative times, so the phase values always sum to total().
class PhaseClock {
 public:
  PhaseClock() : start_(SteadyClock::now()) {}

  // Closes the current phase under `name` (accumulating if seen before).
  std::int64_t lap(const std::string& name) {
    const std::int64_t now = elapsed_ms_since(start_);
    const std::int64_t delta = now - charged_;
    charged_ = now;
    phases_[name] += delta;
    return delta;
  }

  std::int64_t total() const noexcept { return charged_; }
  const std::map<std::string, std::int64_t>& phases() const noexcept { return phases_; }

 private:
  SteadyClock::time_point start_;
  std::int64_t charged_ = 0;
  std::map<std::string, std::int64_t> phases_;
};

}  // namespace mpr
