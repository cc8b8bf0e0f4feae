#pragma once

#include <cstdint>
#include <string>

namespace molvae::util {

// Writes via a temp file in the same directory, then renames into place.
void atomic_write_file(const std::string& path, const std::string& contents);

std::string read_file(const std::string& path);

// FNV-1a of the file contents, formatted as 16 hex digits.
std::string file_hash_hex(const std::string& path);

std::string hex_u64(std::uint64_t v);

// RFC 3339 UTC timestamp of the current moment.
std::string timestamp_utc();

}  // namespace molvae::util
