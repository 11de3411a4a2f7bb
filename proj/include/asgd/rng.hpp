#pragma once

#include <cstdint>
#include <random>

namespace asgd
{
    using Rng = std::mt19937_64;

    // Stream families. Noise and scheduling never share a generator.
    enum class StreamKind : std::uint32_t
    {
        GradientNoise = 0x6e6f6973,
        ComputeTime = 0x74696d65,
        ProblemData = 0x64617461,
        OutputSelection = 0x6f757470,
    };

    /// Independent substream (seed, kind, index), e.g. worker m's gradient noise.
    inline Rng make_stream(std::uint64_t seed, StreamKind kind, std::uint64_t index = 0)
    {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(kind), static_cast<std::uint32_t>(index),
                          static_cast<std::uint32_t>(index >> 32)};
        return Rng(seq);
    }
} // namespace asgd
