#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace hardneg::log {

using Sink = std::function<void(std::string_view level, std::string_view msg)>;

namespace detail {

inline std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

inline Sink& sink() {
  static Sink s = [](std::string_view level, std::string_view msg) {
    std::cerr << "[" << level << "] " << msg << '\n';
  };
  return s;
}

}  // namespace detail

/// Replaces the process-wide sink and returns the previous one.
inline Sink set_sink(Sink s) {
  std::lock_guard lock(detail::sink_mutex());
  std::swap(detail::sink(), s);
  return s;
}

inline void write(std::string_view level, std::string_view msg) {
  std::lock_guard lock(detail::sink_mutex());
  if (detail::sink()) detail::sink()(level, msg);
}

inline void warn(std::string_view msg) { write("warn", msg); }
inline void info(std::string_view msg) { write("info", msg); }

/// Collects warnings for the lifetime of the object; restores the old sink.
class ScopedCapture {
 public:
  ScopedCapture()
      : previous_(set_sink([this](std::string_view level, std::string_view msg) {
          if (level == "warn") warnings_.emplace_back(msg);
        })) {}
  ~ScopedCapture() { set_sink(std::move(previous_)); }
  ScopedCapture(const ScopedCapture&) = delete;
  ScopedCapture& operator=(const ScopedCapture&) = delete;

  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  std::vector<std::string> warnings_;
  Sink previous_;
};

}  // namespace hardneg::log
