#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace vidpipe {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> tokenize_words(std::string_view s);

/// Hex-encoded SHA-256 of the input bytes.
std::string sha256_hex(std::string_view bytes);

std::string base64_encode(std::string_view bytes);

/// Whole-file read; throws IoError with the path on failure.
std::string read_file(const std::filesystem::path& path);

/// Atomic whole-file write (temp + rename).
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// splitmix64 step; the portable PRNG used by the deterministic mocks.
std::uint64_t splitmix64_next(std::uint64_t& state);

/// Uniform double in [-1, 1) from one splitmix64 draw.
double splitmix64_unit_interval(std::uint64_t& state);

struct ParsedUrl {
  std::string scheme;
  std::string host;
  int port = 0;  // 0 = scheme default
  std::string path;
  std::vector<std::pair<std::string, std::string>> query;

  std::string query_value(const std::string& key, const std::string& fallback = "") const;
};

ParsedUrl parse_url(const std::string& url);

}  // namespace vidpipe
