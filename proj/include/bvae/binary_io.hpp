#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

namespace bvae {

// Little-endian append/read helpers for the on-disk formats.
inline void put_u32_le(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline void put_u64_le(std::vector<unsigned char>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

inline std::uint64_t get_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

inline std::uint32_t get_u32_be(const unsigned char* p) {
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

inline void put_f32_le(std::vector<unsigned char>& out, std::span<const float> values) {
    for (float f : values) put_u32_le(out, std::bit_cast<std::uint32_t>(f));
}

inline void get_f32_le(const unsigned char* p, std::span<float> values) {
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = std::bit_cast<float>(get_u32_le(p + 4 * i));
}

std::vector<unsigned char> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const unsigned char> bytes);

} // namespace bvae
