#pragma once

#include <cstdint>
#include <random>

#include "invseq/tensor.hpp"

namespace invseq {

// splitmix64 step; used to derive independent substream seeds so that
// per-trial / per-restart generation is order-independent.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t base, std::uint64_t tag, std::uint64_t index = 0) {
    return mix64(mix64(base ^ mix64(tag)) ^ index);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    return dist(rng);
}

inline double gaussian(std::mt19937_64& rng, double mean = 0.0, double sigma = 1.0) {
    std::normal_distribution<double> dist(mean, sigma);
    return dist(rng);
}

inline Tensor random_uniform(std::mt19937_64& rng, std::vector<std::size_t> shape, double lo, double hi) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = uniform(rng, lo, hi);
    return t;
}

}  // namespace invseq
