#pragma once

#include <string>

namespace morphogen {

inline constexpr const char* kToolVersion = "0.1.0";

/// FNV-1a 64-bit content digest of a file, as 16 hex digits. Used by run
/// manifests to pin the exact inputs of a run.
std::string file_digest_hex(const std::string& path);

/// Current UTC time, ISO 8601 (e.g. "2026-08-09T12:34:56Z").
std::string now_iso8601_utc();

}  // namespace morphogen
