#pragma once

#include <string>

namespace sfc {

enum class LogLevel { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

// Level comes from SFC_LOG (error|warn|info|debug) unless overridden.
void set_log_level(LogLevel level);
LogLevel log_level();

void log(LogLevel level, const std::string& msg);

inline void log_error(const std::string& msg) { log(LogLevel::kError, msg); }
inline void log_warn(const std::string& msg) { log(LogLevel::kWarn, msg); }
inline void log_info(const std::string& msg) { log(LogLevel::kInfo, msg); }
inline void log_debug(const std::string& msg) { log(LogLevel::kDebug, msg); }

}  // namespace sfc
