#pragma once

#include <cstdint>
#include <random>

#include <boost/random/normal_distribution.hpp>

namespace defectscope {

/// Engine and normal sampler shared by all Monte Carlo code. Both have fully
/// specified algorithms, so a seed reproduces a stream on every platform.
using Engine = std::mt19937_64;
using Normal = boost::random::normal_distribution<double>;

/// Independent engine for stream `stream` of a run seeded with `seed`.
inline Engine make_engine(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Engine(seq);
}

}  // namespace defectscope
