#pragma once

#include <cstdint>
#include <random>

namespace lorentz {

/// Deterministic random stream. Streams for ensemble members are derived from
/// (master_seed, index) through std::seed_seq, so member k always sees the same
/// numbers regardless of how members are scheduled across threads.
class RngStream {
public:
    explicit RngStream(std::uint64_t master_seed, std::uint64_t index = 0) {
        std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                          static_cast<std::uint32_t>(master_seed >> 32),
                          static_cast<std::uint32_t>(index),
                          static_cast<std::uint32_t>(index >> 32), 0x4c6f7265u};
        engine_.seed(seq);
    }

    /// Uniform on [0, 1) with 53 random bits; independent of the standard
    /// library's distribution implementations.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint64_t bits() { return engine_(); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace lorentz
