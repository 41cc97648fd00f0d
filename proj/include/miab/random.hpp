#pragma once

#include <cstdint>
#include <random>

namespace miab {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Counter-based seed derivation: the seed of (stream, index) under a master
/// seed is splitmix64(splitmix64(master ^ splitmix64(stream)) + index).
/// Streams keep independent consumers (deployment, policy sampling, k-means)
/// from sharing an engine.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0) {
    return splitmix64(splitmix64(master ^ splitmix64(stream)) + index);
}

namespace stream {
inline constexpr std::uint64_t deployment = 1;
inline constexpr std::uint64_t policy_init = 2;
inline constexpr std::uint64_t action_sampling = 3;
inline constexpr std::uint64_t minibatch = 4;
inline constexpr std::uint64_t kmeans = 5;
inline constexpr std::uint64_t eval_run = 6;
}  // namespace stream

}  // namespace miab
