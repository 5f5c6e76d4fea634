#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace instadet {

// Lowercase ASCII, trim outer whitespace, collapse internal whitespace runs
// to a single underscore. "George Washington" -> "george_washington".
std::string normalize_token(std::string_view raw);

std::vector<std::string> split(std::string_view s, char sep);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

// FNV-1a over a file's bytes, hex-encoded. Used for manifest input hashes.
std::string fnv1a64_file_hex(const std::string& path);
std::string fnv1a64_hex(std::string_view data);

// Fixed-point decimal formatting (CSV cells, report fields).
std::string format_double(double v, int decimals);

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results must be written
// to per-index slots by the caller; completion order is unspecified but the
// work per index is deterministic.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace instadet
