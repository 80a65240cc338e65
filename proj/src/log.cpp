#include "log.hpp"

#include <iostream>
#include <mutex>

namespace mvf::log {

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

void to_stderr(Level level, const std::string& message) {
  static constexpr const char* kNames[] = {"debug", "info", "warn", "error"};
  std::cerr << '[' << kNames[static_cast<int>(level)] << "] " << message << '\n';
}

Sink& current() {
  static Sink sink = to_stderr;
  return sink;
}

}  // namespace

void set_sink(Sink sink) {
  std::lock_guard lock(sink_mutex());
  current() = sink ? std::move(sink) : Sink(to_stderr);
}

void emit(Level level, const std::string& message) {
  std::lock_guard lock(sink_mutex());
  if (current()) current()(level, message);
}

}  // namespace mvf::log
