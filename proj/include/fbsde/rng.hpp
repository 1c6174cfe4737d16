#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace fbsde {

// Deterministic substream: the (seed, stream) pair fully determines the
// draw sequence, so work split into fixed-size blocks reproduces bit-for-bit
// regardless of thread count.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32),
                      0x9e3779b9u};
    return std::mt19937_64(seq);
}

inline std::vector<double> normal_block(std::uint64_t seed, std::uint64_t stream,
                                        std::size_t count) {
    std::mt19937_64 gen = make_stream(seed, stream);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> out(count);
    for (double& v : out) v = normal(gen);
    return out;
}

// Block size used when partitioning Monte Carlo work across streams.
inline constexpr std::size_t kPathBlock = 4096;

}  // namespace fbsde
