#pragma once

#include <string_view>

namespace fedngm {

enum class LogLevel { Debug, Info, Warning, Error };

/// Messages below this level are dropped. Defaults to Warning.
void set_log_level(LogLevel level);
void log(LogLevel level, std::string_view message);

inline void log_info(std::string_view m) { log(LogLevel::Info, m); }
inline void log_warning(std::string_view m) { log(LogLevel::Warning, m); }

}  // namespace fedngm
