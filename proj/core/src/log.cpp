#include "cte/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <string>

namespace cte {

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("CTE_LOG");
    if (env == nullptr) return LogLevel::kWarn;
    const std::string v(env);
    if (v == "debug") return LogLevel::kDebug;
    if (v == "info") return LogLevel::kInfo;
    if (v == "warn") return LogLevel::kWarn;
    if (v == "error") return LogLevel::kError;
    return LogLevel::kWarn;
  }();
  return level;
}

void log(LogLevel level, std::string_view message) {
  if (level < log_level()) return;
  static const char* names[] = {"debug", "info", "warn", "error"};
  std::fprintf(stderr, "[%s] %.*s\n", names[static_cast<int>(level)],
               static_cast<int>(message.size()), message.data());
}

}  // namespace cte
