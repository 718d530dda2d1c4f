#pragma once

// Minimal diagnostic sink. Library code reports recoverable events (clipped
// points, sampling fallbacks) here; applications may redirect or silence it.

#include <functional>
#include <iostream>
#include <string>

namespace moes {

using LogSink = std::function<void(const std::string&)>;

inline LogSink& log_sink() {
  static LogSink sink = [](const std::string& msg) { std::clog << "[moes] " << msg << '\n'; };
  return sink;
}

inline void log_warning(const std::string& msg) {
  if (log_sink()) log_sink()(msg);
}

/// Swaps the sink for the lifetime of the guard.
class ScopedLogSink {
 public:
  explicit ScopedLogSink(LogSink sink) : saved_(std::move(log_sink())) { log_sink() = std::move(sink); }
  ~ScopedLogSink() { log_sink() = std::move(saved_); }
  ScopedLogSink(const ScopedLogSink&) = delete;
  ScopedLogSink& operator=(const ScopedLogSink&) = delete;

 private:
  LogSink saved_;
};

}  // namespace moes
