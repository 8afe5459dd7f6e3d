// SPDX-License-Identifier: Apache-2.0
//
// Minimal stderr logging gated by the SHARECAP_LOG environment variable
// (error | info | debug; default error). Data outputs never go through here.

#pragma once

#include <string>

namespace sharecap {

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

LogLevel log_level();
void log(LogLevel level, const std::string& message);

inline void log_error(const std::string& m) { log(LogLevel::kError, m); }
inline void log_info(const std::string& m) { log(LogLevel::kInfo, m); }
inline void log_debug(const std::string& m) { log(LogLevel::kDebug, m); }

}  // namespace sharecap
