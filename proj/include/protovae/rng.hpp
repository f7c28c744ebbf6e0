#pragma once

#include <cstdint>
#include <random>

namespace protovae {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Stage seeds are derived as mix(master + stream), so a
/// master seed fans out to independent, documented per-stage streams.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return mix_seed(master + mix_seed(stream));
}

// Stream ids for derive_seed. Appending is fine; renumbering changes results.
namespace seed_stream {
inline constexpr std::uint64_t split = 1;
inline constexpr std::uint64_t binarize = 2;
inline constexpr std::uint64_t perturb_train = 3;
inline constexpr std::uint64_t perturb_test = 4;
inline constexpr std::uint64_t model_init = 5;
inline constexpr std::uint64_t training = 6;
inline constexpr std::uint64_t classifier = 7;
inline constexpr std::uint64_t embedding = 8;
inline constexpr std::uint64_t kmeans = 9;
inline constexpr std::uint64_t synthetic = 10;
inline constexpr std::uint64_t evaluation = 11;
}  // namespace seed_stream

}  // namespace protovae
