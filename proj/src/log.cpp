// SPDX-License-Identifier: Apache-2.0

#include "sharecap/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace sharecap {

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("SHARECAP_LOG");
    if (env == nullptr) return LogLevel::kError;
    if (std::strcmp(env, "debug") == 0) return LogLevel::kDebug;
    if (std::strcmp(env, "info") == 0) return LogLevel::kInfo;
    return LogLevel::kError;
  }();
  return level;
}

void log(LogLevel level, const std::string& message) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  const char* tag = level == LogLevel::kError ? "error"
                    : level == LogLevel::kInfo ? "info"
                                               : "debug";
  std::fprintf(stderr, "[sharecap] %s: %s\n", tag, message.c_str());
}

}  // namespace sharecap
