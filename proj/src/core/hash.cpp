#include "bvae/hash.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <memory>

#include "bvae/errors.hpp"

namespace bvae {

namespace {

std::array<unsigned char, 32> digest(std::span<const unsigned char> bytes) {
    std::array<unsigned char, 32> out{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size()) {
        throw Error("sha256: digest failed");
    }
    return out;
}

} // namespace

std::string sha256_hex(std::span<const unsigned char> bytes) {
    static constexpr char hex[] = "0123456789abcdef";
    std::string s;
    for (unsigned char b : digest(bytes)) {
        s.push_back(hex[b >> 4]);
        s.push_back(hex[b & 15]);
    }
    return s;
}

std::string sha256_hex(std::string_view text) {
    return sha256_hex(std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

std::uint64_t sha256_prefix64(std::span<const unsigned char> bytes) {
    const auto d = digest(bytes);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | d[i];
    return v;
}

} // namespace bvae
