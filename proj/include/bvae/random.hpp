#pragma once

#include <cstdint>
#include <random>

namespace bvae {

// Independent random streams derived from one master seed. Each consumer gets
// its own stream so that, e.g., adding a classifier branch never perturbs the
// encoder/decoder initialization.
enum class Stream : std::uint64_t {
    init = 1,
    epsilon = 2,
    shuffle = 3,
    kmeans = 4,
    forest = 5,
    probe = 6,
    rotation = 7,
    targets = 8,
    branch_init = 9,
    repeat = 10,
};

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t index = 0) {
    return mix64(mix64(mix64(master) ^ static_cast<std::uint64_t>(stream)) ^ index);
}

inline std::mt19937_64 make_rng(std::uint64_t master, Stream stream, std::uint64_t index = 0) {
    return std::mt19937_64(derive_seed(master, stream, index));
}

} // namespace bvae
