// Process-wide log sink; stderr unless replaced.
#pragma once

#include <functional>
#include <string>

namespace mvf::log {

enum class Level { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3 };

using Sink = std::function<void(Level, const std::string&)>;

/// An empty sink restores stderr output.
void set_sink(Sink sink);
void emit(Level level, const std::string& message);

inline void info(const std::string& m) { emit(Level::kInfo, m); }
inline void warn(const std::string& m) { emit(Level::kWarn, m); }

}  // namespace mvf::log
