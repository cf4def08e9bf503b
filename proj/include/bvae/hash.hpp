#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace bvae {

// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_hex(std::string_view text);

// First eight digest bytes as a big-endian integer.
std::uint64_t sha256_prefix64(std::span<const unsigned char> bytes);

} // namespace bvae
