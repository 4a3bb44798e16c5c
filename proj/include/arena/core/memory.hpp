#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

namespace arena {

// Live-tensor byte accounting. Tensor storage registers with every meter on
// the thread's scope stack at allocation time and deregisters from the same
// meters on free, so nested scopes each see exactly the allocations made
// while they were open.
class MemoryMeter {
 public:
  std::int64_t current_bytes = 0;
  std::int64_t peak_bytes = 0;
  std::int64_t alloc_events = 0;
  std::int64_t free_events = 0;

  void on_alloc(std::int64_t bytes) {
    current_bytes += bytes;
    if (current_bytes > peak_bytes) peak_bytes = current_bytes;
    ++alloc_events;
  }
  void on_free(std::int64_t bytes) {
    current_bytes -= bytes;
    ++free_events;
  }
};

namespace detail {
inline std::vector<std::shared_ptr<MemoryMeter>>& meter_stack() {
  static thread_local std::vector<std::shared_ptr<MemoryMeter>> stack;
  return stack;
}
}  // namespace detail

class MeterScope {
 public:
  MeterScope() : meter_(std::make_shared<MemoryMeter>()) {
    detail::meter_stack().push_back(meter_);
  }
  ~MeterScope() { detail::meter_stack().pop_back(); }
  MeterScope(const MeterScope&) = delete;
  MeterScope& operator=(const MeterScope&) = delete;

  const MemoryMeter& meter() const { return *meter_; }

 private:
  std::shared_ptr<MemoryMeter> meter_;
};

// Runs f with a fresh meter and returns (result, peak live bytes during f).
template <class F>
auto measure_scope(F&& f) {
  MeterScope scope;
  auto result = std::forward<F>(f)();
  return std::pair{std::move(result), scope.meter().peak_bytes};
}

// Result-free variant.
template <class F>
std::int64_t measure_scope_bytes(F&& f) {
  MeterScope scope;
  std::forward<F>(f)();
  return scope.meter().peak_bytes;
}

}  // namespace arena
