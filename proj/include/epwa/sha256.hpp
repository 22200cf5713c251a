#pragma once

#include <cstdint>
#include <string>

namespace epwa {

// Lowercase hex SHA-256 digest.
std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_file(const std::string& path);

}  // namespace epwa
