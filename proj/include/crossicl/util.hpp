#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace crossicl {

// FNV-1a 64-bit. Used for content addressing (embedding cache keys, prompt
// hashes, config fingerprints).
std::uint64_t fnv1a64(std::string_view data);
std::string to_hex(std::uint64_t value);
std::string content_hash(std::string_view data);  // hex fnv1a64

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::string replace_all(std::string text, std::string_view from,
                        std::string_view to);

// Case-insensitive search; returns npos when absent.
std::size_t ifind_last(std::string_view haystack, std::string_view needle);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// Deterministic splitmix64 stream; avoids libstdc++ distribution quirks.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  double uniform();                       // [0, 1)
  std::uint64_t bounded(std::uint64_t n); // [0, n)

 private:
  std::uint64_t state_;
};

}  // namespace crossicl
