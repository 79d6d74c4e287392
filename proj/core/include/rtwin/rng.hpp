#pragma once

#include <cstdint>
#include <random>

namespace rtwin {

using Rng = std::mt19937_64;

/// Independent random streams derived from one master seed, so drawing more
/// numbers from one component never shifts another.
enum class Stream : std::uint64_t {
    Environment = 1,
    GaussianProcess = 2,
    NetworkInit = 3,
    Exploration = 4,
    BatchSampling = 5,
    PolicyInit = 6,
    ClosureInit = 7,
    Database = 8,
};

std::uint64_t splitmix64(std::uint64_t& state);

Rng make_stream(std::uint64_t master_seed, Stream stream);

}  // namespace rtwin
