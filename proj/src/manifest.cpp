#include "morphogen/manifest.hpp"

#include "morphogen/corpus.hpp"
#include "morphogen/rng.hpp"

#include <cstdio>
#include <ctime>

namespace morphogen {

std::string file_digest_hex(const std::string& path) {
  const std::string content = read_text_file(path);
  const std::uint64_t h = fnv1a64(content.data(), content.size());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string now_iso8601_utc() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace morphogen
